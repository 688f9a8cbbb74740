//! Tabular datasets: ingest, missing-value repair, scaling, grid reshaping
//! and cross-validation folds.

mod arff;
mod csv;
mod folds;
mod grid;
mod preprocess;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arff::{load_arff, parse_arff, write_arff};
pub use csv::{load_csv, parse_csv};
pub use folds::{stratified_kfold, FoldPlan};
pub use grid::{to_grid, to_grid_with, GridPolicy, GridShape};
pub use preprocess::{
    impute_missing, normalize_minmax, AttributeRange, Imputer, MinMaxScaler, Preprocessing,
};

/// Value stored in a cell that was `?` (ARFF) or empty (CSV) until imputation.
pub const MISSING: f64 = f64::NAN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttributeKind {
    Numeric,
    /// Values are integer codes into this list, in declaration order.
    Nominal(Vec<String>),
}

/// Which column holds the class label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassColumn {
    /// The last nominal attribute (ARFF) or the last column (CSV).
    #[default]
    Last,
    Named(String),
}

impl ClassColumn {
    pub fn from_option(name: Option<&str>) -> Self {
        match name {
            Some(n) => ClassColumn::Named(n.to_string()),
            None => ClassColumn::Last,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// `n` rows of `d` attribute values.
    pub instances: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub attribute_names: Vec<String>,
    pub attribute_kinds: Vec<AttributeKind>,
    pub class_attribute: String,
    pub class_names: Vec<String>,
    /// `true` where the source file had no value.
    pub missing_mask: Vec<Vec<bool>>,
}

impl Dataset {
    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn missing_count(&self) -> usize {
        self.missing_mask
            .iter()
            .map(|row| row.iter().filter(|&&m| m).count())
            .sum()
    }

    pub fn has_missing(&self) -> bool {
        self.missing_mask.iter().any(|r| r.iter().any(|&m| m))
    }

    /// A dataset made of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            instances: rows.iter().map(|&r| self.instances[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            attribute_names: self.attribute_names.clone(),
            attribute_kinds: self.attribute_kinds.clone(),
            class_attribute: self.class_attribute.clone(),
            class_names: self.class_names.clone(),
            missing_mask: rows.iter().map(|&r| self.missing_mask[r].clone()).collect(),
        }
    }

    /// Checks the structural invariants. Non-finite values are allowed only
    /// in cells flagged as missing.
    pub fn validate(&self) -> Result<()> {
        let n = self.instances.len();
        let d = self.attribute_names.len();
        if n == 0 {
            return Err(Error::EmptyFile);
        }
        if d == 0 {
            return Err(Error::InvalidArgument("dataset has no attributes".into()));
        }
        if self.n_classes() < 2 {
            return Err(Error::TooFewClasses {
                needed: 2,
                found: self.n_classes(),
            });
        }
        if self.labels.len() != n || self.missing_mask.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: self.labels.len(),
            });
        }
        if self.attribute_kinds.len() != d {
            return Err(Error::LengthMismatch {
                left: d,
                right: self.attribute_kinds.len(),
            });
        }
        for (i, (row, mask)) in self.instances.iter().zip(&self.missing_mask).enumerate() {
            if row.len() != d || mask.len() != d {
                return Err(Error::RowArityMismatch {
                    line: i + 1,
                    expected: d,
                    found: row.len(),
                });
            }
            if row.iter().zip(mask).any(|(v, &m)| !m && !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} holds a non-finite observed value"
                )));
            }
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.n_classes()) {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: self.n_classes(),
            });
        }
        Ok(())
    }
}

/// Loads ARFF or CSV depending on the file extension (`.arff` vs anything else).
pub fn load_dataset(path: impl AsRef<Path>, class: &ClassColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let is_arff = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("arff"))
        .unwrap_or(false);
    if is_arff {
        arff::load_arff_with(path, class)
    } else {
        csv::load_csv(path, class)
    }
}

pub(crate) fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Orders class values numerically when every value is a number, otherwise
/// lexicographically.
pub(crate) fn sort_class_values(values: &mut [String]) {
    let numeric: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        values.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    } else {
        values.sort();
    }
}
