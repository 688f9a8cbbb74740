use serde::{Deserialize, Serialize};

use super::{AttributeKind, Dataset};
use crate::error::{Error, Result};

/// Per-attribute fill values learned from a set of rows: the mean for numeric
/// attributes, the most frequent code (lowest code on ties) for nominal ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub fill: Vec<f64>,
}

impl Imputer {
    pub fn fit(ds: &Dataset, fit_rows: &[usize]) -> Result<Imputer> {
        if fit_rows.is_empty() {
            return Err(Error::InvalidArgument("imputation needs at least one fitting row".into()));
        }
        let mut fill = Vec::with_capacity(ds.n_attributes());
        for (j, kind) in ds.attribute_kinds.iter().enumerate() {
            let observed = fit_rows
                .iter()
                .filter(|&&r| !ds.missing_mask[r][j])
                .map(|&r| ds.instances[r][j]);
            let value = match kind {
                AttributeKind::Numeric => {
                    let (sum, count) = observed.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                    (count > 0).then(|| sum / count as f64)
                }
                AttributeKind::Nominal(values) => {
                    let mut counts = vec![0usize; values.len()];
                    for v in observed {
                        counts[v as usize] += 1;
                    }
                    let best = counts.iter().copied().max().unwrap_or(0);
                    (best > 0).then(|| counts.iter().position(|&c| c == best).unwrap() as f64)
                }
            };
            fill.push(value.ok_or_else(|| Error::AllMissingColumn {
                attribute: ds.attribute_names[j].clone(),
            })?);
        }
        Ok(Imputer { fill })
    }

    /// Replaces missing cells; observed cells and the mask are left as is.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for (row, mask) in out.instances.iter_mut().zip(&out.missing_mask) {
            for ((v, &m), &f) in row.iter_mut().zip(mask).zip(&self.fill) {
                if m {
                    *v = f;
                }
            }
        }
        out
    }
}

/// Fills missing cells using statistics from `fit_rows` only.
pub fn impute_missing(ds: &Dataset, fit_rows: &[usize]) -> Result<Dataset> {
    Ok(Imputer::fit(ds, fit_rows)?.apply(ds))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeRange {
    pub min: f64,
    pub max: f64,
}

/// Affine map of every attribute onto [0, 1] over the fitting data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub ranges: Vec<AttributeRange>,
}

impl MinMaxScaler {
    pub fn fit(train: &Dataset) -> MinMaxScaler {
        let d = train.n_attributes();
        let mut ranges = vec![
            AttributeRange {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            };
            d
        ];
        for row in &train.instances {
            for (r, &v) in ranges.iter_mut().zip(row) {
                r.min = r.min.min(v);
                r.max = r.max.max(v);
            }
        }
        MinMaxScaler { ranges }
    }

    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        let r = self.ranges[j];
        if r.max > r.min {
            (v - r.min) / (r.max - r.min)
        } else {
            0.0
        }
    }

    /// Values outside the fitted range map outside [0, 1].
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for row in &mut out.instances {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.transform_value(j, *v);
            }
        }
        out
    }
}

/// Scales `train` onto [0, 1] per attribute and applies the same map to each
/// of `others`. Constant attributes become 0.
pub fn normalize_minmax(
    train: &Dataset,
    others: &[Dataset],
) -> (Dataset, Vec<Dataset>, Vec<AttributeRange>) {
    let scaler = MinMaxScaler::fit(train);
    let t = scaler.apply(train);
    let o = others.iter().map(|d| scaler.apply(d)).collect();
    (t, o, scaler.ranges)
}

/// Imputation followed by min-max scaling, both fitted on the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub imputer: Imputer,
    pub scaler: MinMaxScaler,
}

impl Preprocessing {
    pub fn fit(ds: &Dataset, fit_rows: &[usize]) -> Result<Preprocessing> {
        let imputer = Imputer::fit(ds, fit_rows)?;
        let scaler = MinMaxScaler::fit(&imputer.apply(&ds.subset(fit_rows)));
        Ok(Preprocessing { imputer, scaler })
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if self.imputer.fill.len() != ds.n_attributes() {
            return Err(Error::ShapeMismatch(format!(
                "preprocessing fitted on {} attributes, dataset has {}",
                self.imputer.fill.len(),
                ds.n_attributes()
            )));
        }
        Ok(self.scaler.apply(&self.imputer.apply(ds)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_csv, ClassColumn};

    fn csv(text: &str) -> Dataset {
        parse_csv(text, &ClassColumn::Last).unwrap()
    }

    #[test]
    fn mean_of_fit_rows() {
        let ds = csv("x,class\n1,a\n,b\n3,a\n");
        let out = impute_missing(&ds, &[0, 2]).unwrap();
        let col: Vec<f64> = out.instances.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![1.0, 2.0, 3.0]);
        assert!(out.missing_mask[1][0]);
    }

    #[test]
    fn no_missing_cells_is_identity() {
        let ds = csv("x,y,class\n1,5,a\n2,6,b\n");
        assert_eq!(impute_missing(&ds, &[0, 1]).unwrap(), ds);
    }

    #[test]
    fn all_missing_over_fit_rows() {
        let ds = csv("x,y,class\n,1,a\n,2,b\n7,3,a\n");
        assert!(matches!(
            impute_missing(&ds, &[0, 1]),
            Err(Error::AllMissingColumn { attribute }) if attribute == "x"
        ));
        assert!(impute_missing(&ds, &[]).is_err());
    }

    #[test]
    fn statistics_ignore_rows_outside_the_fit_set() {
        let ds = csv("x,class\n1,a\n,b\n3,a\n1000,b\n");
        let out = impute_missing(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(out.instances[1][0], 2.0);
    }

    #[test]
    fn nominal_mode_with_lowest_code_on_ties() {
        let ds = csv("c,class\nred,a\nblue,b\n,a\nblue,b\nred,a\n");
        let out = impute_missing(&ds, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(out.instances[2][0], 0.0);
        let out = impute_missing(&ds, &[1, 2, 3]).unwrap();
        assert_eq!(out.instances[2][0], 1.0);
    }

    #[test]
    fn minmax_examples() {
        let train = csv("x,k,class\n2,5,a\n4,5,b\n6,5,a\n");
        let test = csv("x,k,class\n8,1,a\n2,1,b\n");
        let (t, others, ranges) = normalize_minmax(&train, std::slice::from_ref(&test));
        let col: Vec<f64> = t.instances.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        assert!(t.instances.iter().all(|r| r[1] == 0.0));
        assert_eq!(others[0].instances[0], vec![1.5, 0.0]);
        assert_eq!(ranges[0], AttributeRange { min: 2.0, max: 6.0 });
    }

    #[test]
    fn preprocessing_ignores_rows_outside_the_fit_set() {
        let ds = csv("x,class\n1,a\n,b\n3,a\n1000,b\n");
        let p = Preprocessing::fit(&ds, &[0, 1, 2]).unwrap();
        let out = p.apply(&ds).unwrap();
        let col: Vec<f64> = out.instances.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0, 499.5]);
    }
}
