use std::fmt::Write as _;
use std::path::Path;

use super::{dataset_name, sort_class_values, AttributeKind, ClassColumn, Dataset, MISSING};
use crate::error::{Error, Result};

#[derive(Debug)]
struct HeaderAttribute {
    name: String,
    kind: AttributeKind,
}

/// Loads an ARFF file, taking the last nominal attribute as the class.
pub fn load_arff(path: impl AsRef<Path>) -> Result<Dataset> {
    load_arff_with(path.as_ref(), &ClassColumn::Last)
}

pub(crate) fn load_arff_with(path: &Path, class: &ClassColumn) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = parse_arff(&text, class)?;
    if ds.name.is_empty() {
        ds.name = dataset_name(path);
    }
    Ok(ds)
}

/// Splits on commas outside single or double quotes.
fn split_quoted(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for ch in s.chars() {
        match (quote, ch) {
            (Some(q), c) if c == q => {
                quote = None;
                cur.push(c);
            }
            (None, '\'' | '"') => {
                quote = Some(ch);
                cur.push(ch);
            }
            (None, ',') => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    out.push(cur);
    out.into_iter().map(|v| unquote(v.trim()).to_string()).collect()
}

fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Splits `name rest` where `name` may be quoted.
fn take_name(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let first = s.chars().next()?;
    if first == '\'' || first == '"' {
        let end = s[1..].find(first)? + 1;
        Some((s[1..end].to_string(), &s[end + 1..]))
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Some((s[..end].to_string(), &s[end..]))
    }
}

fn keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let head = line.get(..kw.len())?;
    if head.eq_ignore_ascii_case(kw) {
        let rest = &line[kw.len()..];
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            return Some(rest);
        }
    }
    None
}

fn parse_attribute(rest: &str, line: usize) -> Result<HeaderAttribute> {
    let malformed = |message: String| Error::MalformedHeader { line, message };
    let (name, ty) = take_name(rest).ok_or_else(|| malformed("attribute without a name".into()))?;
    let ty = ty.trim();
    if ty.starts_with('{') {
        let close = ty
            .rfind('}')
            .ok_or_else(|| malformed(format!("unterminated value list for {name:?}")))?;
        let values: Vec<String> = split_quoted(&ty[1..close])
            .into_iter()
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(malformed(format!("empty value list for {name:?}")));
        }
        return Ok(HeaderAttribute {
            name,
            kind: AttributeKind::Nominal(values),
        });
    }
    let lower = ty.to_ascii_lowercase();
    match lower.as_str() {
        "numeric" | "real" | "integer" => Ok(HeaderAttribute {
            name,
            kind: AttributeKind::Numeric,
        }),
        "" => Err(malformed(format!("attribute {name:?} has no type"))),
        other => Err(malformed(format!(
            "unsupported type {other:?} for attribute {name:?}"
        ))),
    }
}

/// Parses ARFF text (dense rows, numeric and nominal attributes).
pub fn parse_arff(text: &str, class: &ClassColumn) -> Result<Dataset> {
    let mut relation: Option<String> = None;
    let mut attrs: Vec<HeaderAttribute> = Vec::new();
    let mut data_line: Option<usize> = None;
    let mut lines = text.lines().enumerate();

    for (idx, raw) in lines.by_ref() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = keyword(line, "@relation") {
            let (name, _) = take_name(rest).ok_or(Error::MalformedHeader {
                line: line_no,
                message: "@relation without a name".into(),
            })?;
            relation = Some(name);
        } else if let Some(rest) = keyword(line, "@attribute") {
            if relation.is_none() {
                return Err(Error::MalformedHeader {
                    line: line_no,
                    message: "@attribute before @relation".into(),
                });
            }
            attrs.push(parse_attribute(rest, line_no)?);
        } else if keyword(line, "@data").is_some() {
            data_line = Some(line_no);
            break;
        } else {
            return Err(Error::MalformedHeader {
                line: line_no,
                message: format!("unexpected header line {line:?}"),
            });
        }
    }

    let relation = relation.ok_or(Error::MalformedHeader {
        line: 0,
        message: "missing @relation".into(),
    })?;
    if attrs.is_empty() {
        return Err(Error::MalformedHeader {
            line: 0,
            message: "no @attribute declarations".into(),
        });
    }
    let data_at = data_line.ok_or(Error::MalformedHeader {
        line: 0,
        message: "missing @data section".into(),
    })?;

    let class_idx = match class {
        ClassColumn::Last => attrs
            .iter()
            .rposition(|a| matches!(a.kind, AttributeKind::Nominal(_)))
            .ok_or(Error::MalformedHeader {
                line: data_at,
                message: "no nominal attribute to use as the class".into(),
            })?,
        ClassColumn::Named(name) => {
            attrs
                .iter()
                .position(|a| &a.name == name)
                .ok_or(Error::MalformedHeader {
                    line: data_at,
                    message: format!("class attribute {name:?} not declared"),
                })?
        }
    };

    let width = attrs.len();
    let mut instances = Vec::new();
    let mut mask = Vec::new();
    let mut raw_classes: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if line.starts_with('{') {
            return Err(Error::InvalidArgument(format!(
                "line {line_no}: sparse ARFF rows are not supported"
            )));
        }
        let cells = split_quoted(line);
        if cells.len() != width {
            return Err(Error::RowArityMismatch {
                line: line_no,
                expected: width,
                found: cells.len(),
            });
        }
        let mut row = Vec::with_capacity(width - 1);
        let mut row_mask = Vec::with_capacity(width - 1);
        for (j, (cell, attr)) in cells.iter().zip(&attrs).enumerate() {
            if j == class_idx {
                if cell == "?" {
                    return Err(Error::MissingClass { line: line_no });
                }
                raw_classes.push((line_no, cell.clone()));
                continue;
            }
            if cell == "?" {
                row.push(MISSING);
                row_mask.push(true);
                continue;
            }
            let value = match &attr.kind {
                AttributeKind::Numeric => cell.parse::<f64>().map_err(|_| Error::BadNumber {
                    line: line_no,
                    value: cell.clone(),
                })?,
                AttributeKind::Nominal(values) => {
                    values.iter().position(|v| v == cell).ok_or_else(|| {
                        Error::UnknownNominalValue {
                            line: line_no,
                            attribute: attr.name.clone(),
                            value: cell.clone(),
                        }
                    })? as f64
                }
            };
            row.push(value);
            row_mask.push(false);
        }
        instances.push(row);
        mask.push(row_mask);
    }

    if instances.is_empty() {
        return Err(Error::EmptyFile);
    }

    let class_attr = attrs.remove(class_idx);
    let (class_names, labels) = match class_attr.kind {
        AttributeKind::Nominal(values) => {
            let mut labels = Vec::with_capacity(raw_classes.len());
            for (line, v) in &raw_classes {
                let code = values.iter().position(|x| x == v).ok_or_else(|| {
                    Error::UnknownNominalValue {
                        line: *line,
                        attribute: class_attr.name.clone(),
                        value: v.clone(),
                    }
                })?;
                labels.push(code);
            }
            (values, labels)
        }
        AttributeKind::Numeric => {
            let mut values: Vec<String> = raw_classes.iter().map(|(_, v)| v.clone()).collect();
            sort_class_values(&mut values);
            values.dedup();
            let labels = raw_classes
                .iter()
                .map(|(_, v)| values.iter().position(|x| x == v).unwrap())
                .collect();
            (values, labels)
        }
    };

    let ds = Dataset {
        name: relation,
        instances,
        labels,
        attribute_names: attrs.iter().map(|a| a.name.clone()).collect(),
        attribute_kinds: attrs.into_iter().map(|a| a.kind).collect(),
        class_attribute: class_attr.name,
        class_names,
        missing_mask: mask,
    };
    ds.validate()?;
    Ok(ds)
}

fn quote_if_needed(s: &str) -> String {
    if s.is_empty() || s.contains(|c: char| c.is_whitespace() || ",{}'\"%".contains(c)) {
        format!("'{}'", s.replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

/// Serializes a dataset as ARFF with the class as the last attribute.
///
/// Numeric cells use the shortest decimal form that parses back to the same
/// `f64`, so a write/load cycle reproduces the instance matrix bit for bit.
pub fn write_arff(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}\n", quote_if_needed(&ds.name));
    for (name, kind) in ds.attribute_names.iter().zip(&ds.attribute_kinds) {
        match kind {
            AttributeKind::Numeric => {
                let _ = writeln!(out, "@attribute {} numeric", quote_if_needed(name));
            }
            AttributeKind::Nominal(values) => {
                let vals: Vec<String> = values.iter().map(|v| quote_if_needed(v)).collect();
                let _ = writeln!(
                    out,
                    "@attribute {} {{{}}}",
                    quote_if_needed(name),
                    vals.join(",")
                );
            }
        }
    }
    let classes: Vec<String> = ds.class_names.iter().map(|v| quote_if_needed(v)).collect();
    let _ = writeln!(
        out,
        "@attribute {} {{{}}}\n\n@data",
        quote_if_needed(&ds.class_attribute),
        classes.join(",")
    );
    for ((row, mask), &label) in ds.instances.iter().zip(&ds.missing_mask).zip(&ds.labels) {
        for ((v, &m), kind) in row.iter().zip(mask).zip(&ds.attribute_kinds) {
            if m {
                out.push('?');
            } else {
                match kind {
                    AttributeKind::Numeric => {
                        let _ = write!(out, "{v}");
                    }
                    AttributeKind::Nominal(values) => {
                        out.push_str(&quote_if_needed(&values[*v as usize]));
                    }
                }
            }
            out.push(',');
        }
        out.push_str(&classes[label]);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "% comment\n@RELATION tiny\n\n@attribute x numeric\n@Attribute 'y val' REAL\n@attribute class {a,b}\n\n@DATA\n1,2,a\n3.5,?,b\n-1,0,a\n";

    #[test]
    fn smallest_well_formed_file() {
        let ds = parse_arff(TINY, &ClassColumn::Last).unwrap();
        assert_eq!(ds.n_instances(), 3);
        assert_eq!(ds.n_attributes(), 2);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.attribute_names[1], "y val");
        assert!(ds.missing_mask[1][1]);
        assert!(ds.instances[1][1].is_nan());
        assert_eq!(ds.missing_count(), 1);
    }

    #[test]
    fn short_row_is_arity_error() {
        let text = "@relation t\n@attribute x numeric\n@attribute y numeric\n@attribute c {a,b}\n@data\n1,2,a\n1,b\n";
        match parse_arff(text, &ClassColumn::Last) {
            Err(Error::RowArityMismatch {
                line,
                expected,
                found,
            }) => {
                assert_eq!((line, expected, found), (7, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        let no_rel = "@attribute x numeric\n@attribute c {a,b}\n@data\n1,a\n";
        assert!(matches!(
            parse_arff(no_rel, &ClassColumn::Last),
            Err(Error::MalformedHeader { .. })
        ));
        let no_data = "@relation r\n@attribute x numeric\n@attribute c {a,b}\n";
        assert!(matches!(
            parse_arff(no_data, &ClassColumn::Last),
            Err(Error::MalformedHeader { .. })
        ));
        let no_attr = "@relation r\n@data\n1\n";
        assert!(matches!(
            parse_arff(no_attr, &ClassColumn::Last),
            Err(Error::MalformedHeader { .. })
        ));
        let string_attr = "@relation r\n@attribute s string\n@attribute c {a,b}\n@data\nx,a\n";
        assert!(matches!(
            parse_arff(string_attr, &ClassColumn::Last),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn unknown_nominal_value() {
        let text = "@relation r\n@attribute col {red,green}\n@attribute c {a,b}\n@data\nred,a\nblue,b\n";
        assert!(matches!(
            parse_arff(text, &ClassColumn::Last),
            Err(Error::UnknownNominalValue { line: 6, .. })
        ));
        let bad_class = "@relation r\n@attribute x numeric\n@attribute c {a,b}\n@data\n1,z\n";
        assert!(matches!(
            parse_arff(bad_class, &ClassColumn::Last),
            Err(Error::UnknownNominalValue { .. })
        ));
    }

    #[test]
    fn nominal_predictors_are_coded_in_declaration_order() {
        let text = "@relation r\n@attribute col {red,green,blue}\n@attribute c {a,b}\n@data\nblue,a\nred,b\ngreen,a\n";
        let ds = parse_arff(text, &ClassColumn::Last).unwrap();
        assert_eq!(ds.instances, vec![vec![2.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn named_class_column() {
        let text = "@relation r\n@attribute c {a,b}\n@attribute x numeric\n@attribute other {u,v}\n@data\na,1,u\nb,2,v\n";
        let ds = parse_arff(text, &ClassColumn::Named("c".into())).unwrap();
        assert_eq!(ds.class_attribute, "c");
        assert_eq!(ds.attribute_names, vec!["x", "other"]);
        assert_eq!(ds.labels, vec![0, 1]);
        let last = parse_arff(text, &ClassColumn::Last).unwrap();
        assert_eq!(last.class_attribute, "other");
    }

    #[test]
    fn write_then_parse_is_bit_exact() {
        let text = "@relation r\n@attribute x numeric\n@attribute col {p,q}\n@attribute c {a,b}\n@data\n0.1,p,a\n1e-300,?,b\n?,q,a\n-7.25,p,b\n";
        let ds = parse_arff(text, &ClassColumn::Last).unwrap();
        let again = parse_arff(&write_arff(&ds), &ClassColumn::Last).unwrap();
        assert_eq!(ds.labels, again.labels);
        assert_eq!(ds.missing_mask, again.missing_mask);
        for (a, b) in ds.instances.iter().zip(&again.instances) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
