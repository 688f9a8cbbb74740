use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{build_sorted_cache, SortedIndexCache};
use super::tree::{argmax_counts, grow_tree, Tree, TreeNode};
use super::ForestConfig;
use crate::dcnn::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub n_features: usize,
    pub n_classes: usize,
    /// Names of the class indices; `"0"`, `"1"`, ... unless the caller sets them.
    #[serde(default)]
    pub class_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Bootstrap multiplicity of every training row, per tree.
    pub inbag: Vec<Vec<u32>>,
    /// Per training row, how many out-of-bag trees voted for each class.
    pub oob_votes: Vec<Vec<u32>>,
}

/// `n` uniform draws with replacement: the multiplicity of every row and
/// the rows never drawn.
pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<u32>, Vec<usize>) {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let oob = (0..n).filter(|&i| counts[i] == 0).collect();
    (counts, oob)
}

struct GrownTree {
    tree: Tree,
    inbag: Vec<u32>,
    oob_predictions: Vec<(usize, usize)>,
}

fn grow_one(
    t: usize,
    x: &FeatureMatrix,
    cache: &SortedIndexCache,
    labels: &[usize],
    n_classes: usize,
    cfg: &ForestConfig,
) -> GrownTree {
    let mut r = rng::stream(cfg.seed, t as u64);
    let (inbag, oob) = bootstrap_sample(x.rows, &mut r);
    let tree = grow_tree(&inbag, cache, labels, n_classes, cfg, &mut r);
    let oob_predictions = oob.iter().map(|&i| (i, tree.predict(x.row(i)))).collect();
    GrownTree {
        tree,
        inbag,
        oob_predictions,
    }
}

/// Grows `cfg.n_trees` trees in parallel. Tree `t` draws everything from
/// stream `t` of `cfg.seed`, and results are merged in tree order, so the
/// forest does not depend on the thread count.
pub fn fit_forest(x: &FeatureMatrix, labels: &[usize], n_classes: usize, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    if x.rows != labels.len() {
        return Err(Error::LengthMismatch {
            left: x.rows,
            right: labels.len(),
        });
    }
    if x.rows < 2 {
        return Err(Error::InvalidArgument("a forest needs at least 2 rows".into()));
    }
    if n_classes < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: n_classes,
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label: l,
            classes: n_classes,
        });
    }
    if let Some(m) = cfg.mtry {
        if m > x.cols {
            return Err(Error::MtryTooLarge {
                mtry: m,
                features: x.cols,
            });
        }
    }
    if x.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("feature matrix holds non-finite values".into()));
    }

    let cache = build_sorted_cache(x);
    let grown: Vec<GrownTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| grow_one(t, x, &cache, labels, n_classes, cfg))
        .collect();

    let mut oob_votes = vec![vec![0u32; n_classes]; x.rows];
    let mut trees = Vec::with_capacity(grown.len());
    let mut inbag = Vec::with_capacity(grown.len());
    for g in grown {
        for &(i, c) in &g.oob_predictions {
            oob_votes[i][c] += 1;
        }
        trees.push(g.tree);
        inbag.push(g.inbag);
    }
    Ok(Forest {
        config: cfg.clone(),
        n_features: x.cols,
        n_classes,
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        trees,
        inbag,
        oob_votes,
    })
}

/// Out-of-bag error over the rows that received at least one OOB vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OobEstimate {
    pub error: f64,
    pub rows_scored: usize,
    pub rows_without_votes: usize,
}

impl Forest {
    fn check_features(&self, x: &FeatureMatrix) -> Result<()> {
        if x.cols != self.n_features {
            return Err(Error::ShapeMismatch(format!(
                "forest expects {} features, matrix has {}",
                self.n_features, x.cols
            )));
        }
        Ok(())
    }

    /// Leaf class counts of `row` summed over all trees.
    pub fn vote_totals(&self, row: &[f64]) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_classes];
        for t in &self.trees {
            for (s, &c) in totals.iter_mut().zip(t.leaf_counts(row)) {
                *s += c;
            }
        }
        totals
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ForestFileRef {
            format: FOREST_FORMAT,
            version: FOREST_VERSION,
            forest: self,
        };
        serde_json::to_string(&file).map_err(|e| Error::json("serializing forest", e))
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let file: ForestFile = serde_json::from_str(text).map_err(|e| Error::json("reading forest", e))?;
        if file.format != FOREST_FORMAT || file.version != FOREST_VERSION {
            return Err(Error::InvalidArgument(format!(
                "not a forest file (format {:?} version {})",
                file.format, file.version
            )));
        }
        Ok(file.forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Forest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Forest::from_json(&text)
    }
}

const FOREST_FORMAT: &str = "convforest-forest";
const FOREST_VERSION: u32 = 1;

#[derive(Serialize)]
struct ForestFileRef<'a> {
    format: &'a str,
    version: u32,
    forest: &'a Forest,
}

#[derive(Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    forest: Forest,
}

/// Class with the largest summed leaf counts per row; lowest index on ties.
pub fn predict_forest(forest: &Forest, x: &FeatureMatrix) -> Result<Vec<usize>> {
    forest.check_features(x)?;
    Ok((0..x.rows)
        .into_par_iter()
        .map(|i| argmax_counts(&forest.vote_totals(x.row(i))))
        .collect())
}

pub fn oob_error(forest: &Forest, labels: &[usize]) -> Result<OobEstimate> {
    if labels.len() != forest.oob_votes.len() {
        return Err(Error::LengthMismatch {
            left: forest.oob_votes.len(),
            right: labels.len(),
        });
    }
    let mut scored = 0;
    let mut wrong = 0;
    for (votes, &l) in forest.oob_votes.iter().zip(labels) {
        if votes.iter().all(|&v| v == 0) {
            continue;
        }
        scored += 1;
        let v64: Vec<u64> = votes.iter().map(|&v| v as u64).collect();
        if argmax_counts(&v64) != l {
            wrong += 1;
        }
    }
    if scored == 0 {
        return Err(Error::NoOobVotes);
    }
    Ok(OobEstimate {
        error: wrong as f64 / scored as f64,
        rows_scored: scored,
        rows_without_votes: labels.len() - scored,
    })
}

/// Weighted Gini decrease per attribute summed over each tree's splits,
/// averaged over trees and normalized to sum 1 (all zeros without splits).
pub fn feature_importance(forest: &Forest) -> Vec<f64> {
    let mut imp = vec![0.0; forest.n_features];
    for t in &forest.trees {
        for n in &t.nodes {
            if let TreeNode::Internal {
                attribute,
                decrease,
                weight,
                ..
            } = n
            {
                imp[*attribute] += decrease.max(0.0) * *weight as f64;
            }
        }
    }
    let k = forest.trees.len().max(1) as f64;
    imp.iter_mut().for_each(|v| *v /= k);
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    }
    imp
}

/// `attribute,importance` CSV rows in descending order of importance (ties
/// by attribute index).
pub fn importance_csv(names: &[String], scores: &[f64]) -> String {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = String::from("attribute,importance\n");
    for i in idx {
        let name = names.get(i).cloned().unwrap_or_else(|| format!("f{i}"));
        out.push_str(&format!("{name},{}\n", scores[i]));
    }
    out
}
