use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of features handed to the forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    /// Where the columns came from, e.g. `dense-relu(64)` or `raw`.
    pub source: String,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} feature matrix",
                values.len()
            )));
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            values,
            source: source.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], source: impl Into<String>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                left: cols,
                right: r.len(),
            });
        }
        FeatureMatrix::new(rows.len(), cols, rows.concat(), source)
    }

    /// The attribute matrix of a dataset; missing cells must be imputed first.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        if ds.instances.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dataset {} has unimputed missing values",
                ds.name
            )));
        }
        FeatureMatrix::from_rows(&ds.instances, "raw")
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            values,
            source: self.source.clone(),
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        (0..self.cols).map(|j| format!("f{j}")).collect()
    }

    /// CSV with header `f0,...,f{cols-1},class`; class cells are the names.
    pub fn to_csv(&self, labels: &[usize], class_names: &[String]) -> Result<String> {
        if labels.len() != self.rows {
            return Err(Error::LengthMismatch {
                left: self.rows,
                right: labels.len(),
            });
        }
        let mut out = self.column_names().join(",");
        out.push_str(",class\n");
        for (i, &l) in labels.iter().enumerate() {
            for v in self.row(i) {
                out.push_str(&format!("{v},"));
            }
            let name = class_names.get(l).ok_or(Error::LabelOutOfRange {
                label: l,
                classes: class_names.len(),
            })?;
            out.push_str(name);
            out.push('\n');
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_csv, ClassColumn};

    #[test]
    fn csv_round_trip() {
        let m = FeatureMatrix::from_rows(&[vec![0.1, 2.0], vec![0.0, 1.0 / 3.0]], "raw").unwrap();
        let text = m.to_csv(&[1, 0], &["a".into(), "b".into()]).unwrap();
        assert!(text.starts_with("f0,f1,class\n"));
        let ds = parse_csv(&text, &ClassColumn::Last).unwrap();
        let back = FeatureMatrix::from_dataset(&ds).unwrap();
        assert_eq!(back.values, m.values);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(FeatureMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]], "x").is_err());
    }
}
