use std::path::Path;

use super::{dataset_name, sort_class_values, AttributeKind, ClassColumn, Dataset, MISSING};
use crate::error::{Error, Result};

/// Loads a comma-separated file whose first line is a header.
///
/// A column is numeric when every non-empty cell parses as a number;
/// otherwise it is nominal with codes assigned in order of first appearance.
/// Empty cells are missing.
pub fn load_csv(path: impl AsRef<Path>, class: &ClassColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = parse_csv(&text, class)?;
    ds.name = dataset_name(path);
    Ok(ds)
}

pub fn parse_csv(text: &str, class: &ClassColumn) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyFile)?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let width = names.len();
    if width < 2 {
        return Err(Error::InvalidArgument(
            "CSV needs at least one attribute column and a class column".into(),
        ));
    }
    let class_idx = match class {
        ClassColumn::Last => width - 1,
        ClassColumn::Named(n) => names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named {n:?}")))?,
    };

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut line_nos = Vec::new();
    for (idx, line) in lines {
        let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != width {
            return Err(Error::RowArityMismatch {
                line: idx + 1,
                expected: width,
                found: row.len(),
            });
        }
        cells.push(row);
        line_nos.push(idx + 1);
    }
    if cells.is_empty() {
        return Err(Error::EmptyFile);
    }

    let mut attribute_names = Vec::new();
    let mut kinds = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut masks: Vec<Vec<bool>> = Vec::new();
    for j in (0..width).filter(|&j| j != class_idx) {
        let numeric = cells
            .iter()
            .all(|r| r[j].is_empty() || r[j].parse::<f64>().is_ok());
        let mut col = Vec::with_capacity(cells.len());
        let mut mask = Vec::with_capacity(cells.len());
        if numeric {
            for r in &cells {
                if r[j].is_empty() {
                    col.push(MISSING);
                    mask.push(true);
                } else {
                    col.push(r[j].parse::<f64>().unwrap());
                    mask.push(false);
                }
            }
            kinds.push(AttributeKind::Numeric);
        } else {
            let mut values: Vec<String> = Vec::new();
            for r in &cells {
                if r[j].is_empty() {
                    col.push(MISSING);
                    mask.push(true);
                    continue;
                }
                let code = match values.iter().position(|v| v == &r[j]) {
                    Some(c) => c,
                    None => {
                        values.push(r[j].clone());
                        values.len() - 1
                    }
                };
                col.push(code as f64);
                mask.push(false);
            }
            kinds.push(AttributeKind::Nominal(values));
        }
        attribute_names.push(names[j].clone());
        columns.push(col);
        masks.push(mask);
    }

    let mut class_names: Vec<String> = Vec::new();
    for (r, &line) in cells.iter().zip(&line_nos) {
        if r[class_idx].is_empty() {
            return Err(Error::MissingClass { line });
        }
        if !class_names.contains(&r[class_idx]) {
            class_names.push(r[class_idx].clone());
        }
    }
    sort_class_values(&mut class_names);
    let labels = cells
        .iter()
        .map(|r| class_names.iter().position(|c| c == &r[class_idx]).unwrap())
        .collect();

    let n = cells.len();
    let instances = (0..n)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let missing_mask = (0..n).map(|i| masks.iter().map(|m| m[i]).collect()).collect();

    let ds = Dataset {
        name: String::new(),
        instances,
        labels,
        attribute_names,
        attribute_kinds: kinds,
        class_attribute: names[class_idx].clone(),
        class_names,
        missing_mask,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_two_rows() {
        let ds = parse_csv("x,y,class\n1,2,a\n3,4,b\n", &ClassColumn::Last).unwrap();
        assert_eq!(ds.n_instances(), 2);
        assert_eq!(ds.n_attributes(), 2);
        assert_eq!(ds.class_names, vec!["a", "b"]);
    }

    #[test]
    fn empty_cell_is_missing() {
        let ds = parse_csv("x,y,class\n1,,a\n3,4,b\n", &ClassColumn::Last).unwrap();
        assert!(ds.missing_mask[0][1]);
        assert!(!ds.missing_mask[1][1]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_csv("", &ClassColumn::Last),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            parse_csv("x,class\n", &ClassColumn::Last),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            parse_csv("x,y,class\n1,2,a\n1,a\n", &ClassColumn::Last),
            Err(Error::RowArityMismatch { line: 3, .. })
        ));
    }

    #[test]
    fn numeric_classes_sort_numerically_and_columns_can_be_named() {
        let ds = parse_csv("cls,x\n10,1\n9,2\n10,3\n", &ClassColumn::Named("cls".into())).unwrap();
        assert_eq!(ds.class_names, vec!["9", "10"]);
        assert_eq!(ds.labels, vec![1, 0, 1]);
        assert_eq!(ds.attribute_names, vec!["x"]);
    }

    #[test]
    fn text_columns_become_nominal() {
        let ds = parse_csv("c,x,class\nred,1,a\nblue,2,b\nred,3,a\n", &ClassColumn::Last).unwrap();
        assert_eq!(
            ds.attribute_kinds[0],
            AttributeKind::Nominal(vec!["red".into(), "blue".into()])
        );
        assert_eq!(ds.instances[1][0], 1.0);
    }
}
