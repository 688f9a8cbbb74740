use serde::{Deserialize, Serialize};

use crate::dcnn::FeatureMatrix;
use crate::error::{Error, Result};

/// Per attribute, the row indices sorted ascending by value (ties by row
/// index), plus a column-major copy of the values for fast sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedIndexCache {
    pub order: Vec<Vec<u32>>,
    pub columns: Vec<Vec<f64>>,
}

impl SortedIndexCache {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_attributes(&self) -> usize {
        self.columns.len()
    }
}

pub fn build_sorted_cache(x: &FeatureMatrix) -> SortedIndexCache {
    let columns: Vec<Vec<f64>> = (0..x.cols).map(|j| x.column(j)).collect();
    let order = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..col.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect();
    SortedIndexCache { order, columns }
}

/// `1 − Σ (countᵢ / total)²`.
pub fn gini(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyNode);
    }
    Ok(gini_of(counts, total))
}

#[inline]
pub(crate) fn gini_of(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Weighted Gini decrease of splitting `parent` into `left` and the remainder.
pub fn split_score(parent: &[u64], total: u64, left: &[u64], left_total: u64) -> f64 {
    let right: Vec<u64> = parent.iter().zip(left).map(|(p, l)| p - l).collect();
    let right_total = total - left_total;
    let t = total as f64;
    gini_of(parent, total)
        - (left_total as f64 / t) * gini_of(left, left_total)
        - (right_total as f64 / t) * gini_of(&right, right_total)
}

/// Threshold between adjacent distinct values `a < b`: the midpoint, or `a`
/// when rounding would push the midpoint onto `b`.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub attribute: usize,
    pub threshold: f64,
    /// Gini decrease weighted by the child fractions.
    pub decrease: f64,
}

/// Node statistics shared by the sweeps of one node.
pub(crate) struct NodeStats<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [u32],
    pub parent: &'a [u64],
    pub total: u64,
    pub min_leaf: u64,
}

/// One left-to-right pass over `segment` (node rows in ascending order of
/// `column`), scoring every boundary between distinct values. The first
/// best boundary wins ties.
pub(crate) fn sweep(segment: &[u32], column: &[f64], node: &NodeStats, left: &mut [u64]) -> Option<(f64, f64)> {
    left.fill(0);
    let mut left_total = 0u64;
    let mut best: Option<(f64, f64)> = None;
    for p in 0..segment.len().saturating_sub(1) {
        let r = segment[p] as usize;
        let w = node.weights[r] as u64;
        left[node.labels[r]] += w;
        left_total += w;
        let v = column[r];
        let next = column[segment[p + 1] as usize];
        if next <= v {
            continue;
        }
        if left_total < node.min_leaf || node.total - left_total < node.min_leaf {
            continue;
        }
        let score = split_score(node.parent, node.total, left, left_total);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((midpoint(v, next), score));
        }
    }
    best
}

/// Best split over `attrs` (ascending) given each attribute's node segment.
pub(crate) fn best_of<'s>(
    attrs: &[usize],
    segment_of: impl Fn(usize) -> &'s [u32],
    cache: &SortedIndexCache,
    node: &NodeStats,
    n_classes: usize,
) -> Option<Split> {
    let mut left = vec![0u64; n_classes];
    let mut best: Option<Split> = None;
    for &a in attrs {
        if let Some((threshold, decrease)) = sweep(segment_of(a), &cache.columns[a], node, &mut left) {
            if best.is_none_or(|b| decrease > b.decrease) {
                best = Some(Split {
                    attribute: a,
                    threshold,
                    decrease,
                });
            }
        }
    }
    best
}

/// Weighted class counts of the rows with nonzero weight.
pub fn class_counts(weights: &[u32], labels: &[usize], n_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_classes];
    for (&w, &l) in weights.iter().zip(labels) {
        counts[l] += w as u64;
    }
    counts
}

/// Best Gini split of the rows with nonzero `weights` (bootstrap
/// multiplicities) over the candidate attributes, found by sweeping the
/// presorted lists. `None` when the node is pure or no candidate attribute
/// has a boundary leaving `min_leaf` weight on both sides.
pub fn best_split(
    weights: &[u32],
    attrs: &[usize],
    cache: &SortedIndexCache,
    labels: &[usize],
    n_classes: usize,
    min_leaf: u64,
) -> Option<Split> {
    let parent = class_counts(weights, labels, n_classes);
    let total: u64 = parent.iter().sum();
    if total == 0 || parent.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let mut attrs = attrs.to_vec();
    attrs.sort_unstable();
    attrs.dedup();
    let segments: Vec<Vec<u32>> = attrs
        .iter()
        .map(|&a| {
            cache.order[a]
                .iter()
                .copied()
                .filter(|&r| weights[r as usize] > 0)
                .collect()
        })
        .collect();
    let node = NodeStats {
        labels,
        weights,
        parent: &parent,
        total,
        min_leaf: min_leaf.max(1),
    };
    let pos = |a: usize| attrs.iter().position(|&x| x == a).unwrap();
    best_of(&attrs, |a| &segments[pos(a)], cache, &node, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[&[f64]]) -> FeatureMatrix {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix::from_rows(&rows, "test").unwrap()
    }

    #[test]
    fn cache_examples() {
        let c = build_sorted_cache(&matrix(&[&[3.0, 1.0, 2.0], &[5.0, 5.0, 1.0]]));
        assert_eq!(c.order[0], vec![1, 2, 0]);
        assert_eq!(c.order[1], vec![2, 0, 1]);
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[2, 2]).unwrap(), 0.5);
        assert!((gini(&[1, 2, 3]).unwrap() - 11.0 / 18.0).abs() < 1e-15);
        assert!(matches!(gini(&[0, 0]), Err(Error::EmptyNode)));
    }

    #[test]
    fn one_dimensional_split() {
        let x = matrix(&[&[1.0, 2.0, 3.0, 4.0]]);
        let c = build_sorted_cache(&x);
        let s = best_split(&[1; 4], &[0], &c, &[0, 0, 1, 1], 2, 1).unwrap();
        assert_eq!(s.attribute, 0);
        assert_eq!(s.threshold, 2.5);
        assert!((s.decrease - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_node_has_no_split() {
        let c = build_sorted_cache(&matrix(&[&[1.0, 2.0, 3.0]]));
        assert!(best_split(&[1; 3], &[0], &c, &[1, 1, 1], 2, 1).is_none());
    }

    #[test]
    fn constant_attribute_has_no_split() {
        let c = build_sorted_cache(&matrix(&[&[7.0, 7.0, 7.0]]));
        assert!(best_split(&[1; 3], &[0], &c, &[0, 1, 0], 2, 1).is_none());
    }

    #[test]
    fn equal_gains_prefer_the_lower_attribute() {
        let x = matrix(&[&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]]);
        let c = build_sorted_cache(&x);
        let s = best_split(&[1; 4], &[1, 0], &c, &[0, 0, 1, 1], 2, 1).unwrap();
        assert_eq!(s.attribute, 0);
    }

    #[test]
    fn weights_count_as_multiplicities() {
        // Row 0 drawn three times makes the left side heavier.
        let x = matrix(&[&[1.0, 2.0, 3.0]]);
        let c = build_sorted_cache(&x);
        let s = best_split(&[3, 1, 0], &[0], &c, &[0, 1, 1], 2, 1).unwrap();
        assert_eq!(s.threshold, 1.5);
        assert!((s.decrease - 2.0 * 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn midpoint_guard() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(f64::MAX / 2.0 * 1.5, f64::MAX), f64::MAX / 2.0 * 1.5);
    }
}
