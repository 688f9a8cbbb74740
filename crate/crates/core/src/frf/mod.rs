//! Random forest of Gini trees whose split search sweeps attribute lists
//! sorted once per fit, with out-of-bag error and impurity importance.

mod forest;
mod split;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{
    bootstrap_sample, feature_importance, fit_forest, importance_csv, oob_error, predict_forest, Forest,
    OobEstimate,
};
pub use split::{best_split, build_sorted_cache, gini, midpoint, split_score, SortedIndexCache, Split};
pub use tree::{grow_tree, sample_attributes, Tree, TreeNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Attributes drawn per split; `None` means `floor(log2 f) + 1`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

/// `floor(log2 f) + 1`, the usual random-feature count for `f` attributes.
pub fn default_mtry(f: usize) -> usize {
    if f == 0 {
        0
    } else {
        f.ilog2() as usize + 1
    }
}

impl ForestConfig {
    pub fn resolve_mtry(&self, f: usize) -> usize {
        self.mtry.unwrap_or_else(|| default_mtry(f)).min(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be positive".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::InvalidConfig("mtry must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mtry_formula() {
        assert_eq!(default_mtry(64), 7);
        assert_eq!(default_mtry(16), 5);
        assert_eq!(default_mtry(19), 5);
        assert_eq!(default_mtry(36), 6);
        assert_eq!(default_mtry(1), 1);
    }
}
