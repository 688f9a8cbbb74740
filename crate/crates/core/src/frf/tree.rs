use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_of, class_counts, NodeStats, SortedIndexCache};
use super::ForestConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `value <= threshold` go to `left`, the rest to `right`.
    Internal {
        attribute: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted Gini decrease of this split and the in-bag weight it saw.
        decrease: f64,
        weight: u64,
    },
    Leaf {
        class_counts: Vec<u64>,
    },
}

/// Nodes in preorder; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Weighted class counts of the leaf `row` lands in.
    pub fn leaf_counts(&self, row: &[f64]) -> &[u64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Internal {
                    attribute,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*attribute] <= *threshold { *left } else { *right },
                TreeNode::Leaf { class_counts } => return class_counts,
            }
        }
    }

    /// Majority class of the leaf `row` lands in; the lowest index wins ties.
    pub fn predict(&self, row: &[f64]) -> usize {
        argmax_counts(self.leaf_counts(row))
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Internal { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

pub(crate) fn argmax_counts(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Draws `mtry` distinct attributes out of `n` and returns them ascending.
pub fn sample_attributes<R: Rng + ?Sized>(rng: &mut R, n: usize, mtry: usize) -> Vec<usize> {
    let mut v = index::sample(rng, n, mtry.min(n)).into_vec();
    v.sort_unstable();
    v
}

struct Pending {
    start: usize,
    end: usize,
    depth: usize,
    /// Parent node whose `right` field must point at this node.
    right_of: Option<usize>,
}

/// Grows one tree on the rows with nonzero `inbag` count.
///
/// Each attribute's presorted list is first filtered to the in-bag rows; a
/// node owns the same `[start, end)` range in every list, and splitting it
/// stably partitions that range so both children stay sorted without any
/// re-sorting.
pub fn grow_tree<R: Rng + ?Sized>(
    inbag: &[u32],
    cache: &SortedIndexCache,
    labels: &[usize],
    n_classes: usize,
    cfg: &ForestConfig,
    rng: &mut R,
) -> Tree {
    let f = cache.n_attributes();
    let mtry = cfg.resolve_mtry(f);
    let min_leaf = cfg.min_leaf.max(1) as u64;
    let mut lists: Vec<Vec<u32>> = cache
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| inbag[r as usize] > 0).collect())
        .collect();
    let m = lists.first().map_or(0, Vec::len);

    let mut goes_left = vec![false; inbag.len()];
    let mut scratch: Vec<u32> = Vec::with_capacity(m);
    let mut nodes = Vec::new();
    let mut stack = vec![Pending {
        start: 0,
        end: m,
        depth: 0,
        right_of: None,
    }];

    while let Some(p) = stack.pop() {
        let id = nodes.len();
        if let Some(parent) = p.right_of {
            if let TreeNode::Internal { right, .. } = &mut nodes[parent] {
                *right = id;
            }
        }
        let rows = &lists[0][p.start..p.end];
        let mut parent = vec![0u64; n_classes];
        for &r in rows {
            parent[labels[r as usize]] += inbag[r as usize] as u64;
        }
        let total: u64 = parent.iter().sum();
        let pure = parent.iter().filter(|&&c| c > 0).count() < 2;
        let depth_capped = cfg.max_depth.is_some_and(|d| p.depth >= d);
        if pure || depth_capped || total < 2 * min_leaf || f == 0 {
            nodes.push(TreeNode::Leaf { class_counts: parent });
            continue;
        }
        let attrs = sample_attributes(rng, f, mtry);
        let node = NodeStats {
            labels,
            weights: inbag,
            parent: &parent,
            total,
            min_leaf,
        };
        let split = best_of(&attrs, |a| &lists[a][p.start..p.end], cache, &node, n_classes);
        let Some(split) = split else {
            nodes.push(TreeNode::Leaf { class_counts: parent });
            continue;
        };

        let col = &cache.columns[split.attribute];
        let mut n_left = 0;
        for &r in &lists[0][p.start..p.end] {
            let l = col[r as usize] <= split.threshold;
            goes_left[r as usize] = l;
            n_left += l as usize;
        }
        for list in &mut lists {
            let seg = &mut list[p.start..p.end];
            scratch.clear();
            let mut w = 0;
            for i in 0..seg.len() {
                let r = seg[i];
                if goes_left[r as usize] {
                    seg[w] = r;
                    w += 1;
                } else {
                    scratch.push(r);
                }
            }
            seg[w..].copy_from_slice(&scratch);
        }

        nodes.push(TreeNode::Internal {
            attribute: split.attribute,
            threshold: split.threshold,
            left: id + 1,
            right: usize::MAX,
            decrease: split.decrease,
            weight: total,
        });
        let mid = p.start + n_left;
        stack.push(Pending {
            start: mid,
            end: p.end,
            depth: p.depth + 1,
            right_of: Some(id),
        });
        stack.push(Pending {
            start: p.start,
            end: mid,
            depth: p.depth + 1,
            right_of: None,
        });
    }
    debug_assert_eq!(class_counts(inbag, labels, n_classes).iter().sum::<u64>(), {
        nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { class_counts } => Some(class_counts.iter().sum::<u64>()),
                _ => None,
            })
            .sum::<u64>()
    });
    Tree { nodes }
}
