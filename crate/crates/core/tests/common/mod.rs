//! Reference implementations and fixtures shared by the integration tests
//! and the acceptance runner. Everything here is written for clarity, not
//! speed, and uses no library internals beyond the public types it compares.

#![allow(dead_code)]

use std::path::PathBuf;

use convforest::dcnn::{ConvLayerSpec, Masks, Network, NetworkConfig, Tensor3};
use convforest::frf::{sample_attributes, ForestConfig, Split, Tree, TreeNode};
use convforest::rng;
use rand::Rng;

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Two-tailed 5% critical values of Student's t for df = 1..=30, from the
/// standard printed table.
pub const T_CRITICAL_05: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
    2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

// ---------------------------------------------------------------------------
// Gradient check

pub struct GradientTrial {
    pub parameters: usize,
    /// `‖analytic − numeric‖ / (‖analytic‖ + ‖numeric‖)` over all parameters.
    pub relative_error: f64,
    /// Largest per-parameter gap, for diagnostics.
    pub max_abs_error: f64,
}

/// A random small network (at most `max_params` parameters), a random batch,
/// and the analytic gradient of its mean loss against central differences
/// with step `eps`. With `dropout`, one fixed pair of masks per sample is
/// shared by both sides.
pub fn gradient_trial(seed: u64, max_params: usize, eps: f64, dropout: bool) -> GradientTrial {
    let mut r = rng::stream(seed, 77);
    let (net, inputs, labels, masks) = loop {
        let n_layers = r.random_range(1..=2);
        let mut layers = Vec::new();
        for _ in 0..n_layers {
            layers.push(ConvLayerSpec::new(
                r.random_range(1..=3),
                r.random_range(1..=3),
                r.random_range(1..=3),
                r.random_range(1..=2),
                r.random_range(1..=2),
            ));
        }
        let cfg = NetworkConfig {
            conv_layers: layers,
            dense_units: r.random_range(2..=6),
            ..NetworkConfig::default()
        };
        let (h, w) = (r.random_range(4..=8), r.random_range(4..=8));
        let classes = r.random_range(2..=4);
        let Ok(mut net) = Network::init(&cfg, h, w, classes, &mut r) else {
            continue;
        };
        if net.parameter_count() > max_params {
            continue;
        }
        // Nonzero biases so every parameter has a gradient to check.
        let flat: Vec<f64> = net.to_flat().iter().map(|v| v + r.random_range(-0.1..0.1)).collect();
        net.set_flat(&flat).unwrap();
        let batch = r.random_range(1..=3);
        let inputs: Vec<Tensor3> = (0..batch)
            .map(|_| Tensor3::from_vec(1, h, w, (0..h * w).map(|_| r.random::<f64>()).collect()).unwrap())
            .collect();
        let labels: Vec<usize> = (0..batch).map(|_| r.random_range(0..classes)).collect();
        let masks: Vec<Masks> = (0..batch)
            .map(|_| {
                if dropout {
                    Masks::sample(h * w, cfg.dense_units, 0.2, 0.5, &mut r)
                } else {
                    Masks::none()
                }
            })
            .collect();
        break (net, inputs, labels, masks);
    };

    let refs: Vec<&Tensor3> = inputs.iter().collect();
    let (_, grads) = net.batch_gradients(&refs, &labels, &masks).unwrap();
    let analytic = grads.to_flat();
    let base = net.to_flat();
    let mut probe = net.clone();
    let mut numeric = vec![0.0; base.len()];
    for i in 0..base.len() {
        let mut w = base.clone();
        w[i] = base[i] + eps;
        probe.set_flat(&w).unwrap();
        let up = probe.batch_loss(&refs, &labels, &masks).unwrap();
        w[i] = base[i] - eps;
        probe.set_flat(&w).unwrap();
        let down = probe.batch_loss(&refs, &labels, &masks).unwrap();
        numeric[i] = (up - down) / (2.0 * eps);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let denom = norm(&analytic) + norm(&numeric);
    GradientTrial {
        parameters: base.len(),
        relative_error: if denom == 0.0 { 0.0 } else { norm(&diff) / denom },
        max_abs_error: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
    }
}

// ---------------------------------------------------------------------------
// Brute-force splitter and tree grower

/// A random small classification problem with weights in 0..=3 and values
/// drawn from a coarse grid (so ties are common) or a continuum.
pub struct SplitCase {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub weights: Vec<u32>,
    pub n_classes: usize,
    pub min_leaf: usize,
    pub mtry: usize,
    pub max_depth: Option<usize>,
}

pub fn split_case(seed: u64) -> SplitCase {
    let mut r = rng::stream(seed, 91);
    let n = r.random_range(2..=40);
    let d = r.random_range(1..=6);
    let n_classes = r.random_range(2..=4);
    let coarse = r.random_bool(0.5);
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if coarse {
                        r.random_range(0..5) as f64 * 0.5
                    } else {
                        r.random_range(-3.0..3.0)
                    }
                })
                .collect()
        })
        .collect();
    SplitCase {
        rows,
        labels: (0..n).map(|_| r.random_range(0..n_classes)).collect(),
        weights: (0..n).map(|_| r.random_range(0..=3)).collect(),
        n_classes,
        min_leaf: r.random_range(1..=3),
        mtry: r.random_range(1..=d),
        max_depth: if r.random_bool(0.3) { Some(r.random_range(1..=4)) } else { None },
    }
}

fn gini(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t) * (c as f64 / t)).sum::<f64>()
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = (a + b) / 2.0;
    if m < b && m.is_finite() {
        m
    } else {
        a
    }
}

/// Every midpoint between distinct in-node values of every candidate,
/// each scored by recounting all rows.
pub fn brute_force_split(
    rows: &[Vec<f64>],
    labels: &[usize],
    weights: &[u32],
    attrs: &[usize],
    n_classes: usize,
    min_leaf: u64,
) -> Option<Split> {
    let members: Vec<usize> = (0..rows.len()).filter(|&i| weights[i] > 0).collect();
    let mut parent = vec![0u64; n_classes];
    for &i in &members {
        parent[labels[i]] += weights[i] as u64;
    }
    let total: u64 = parent.iter().sum();
    if total == 0 || parent.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let mut attrs = attrs.to_vec();
    attrs.sort_unstable();
    attrs.dedup();
    let mut best: Option<Split> = None;
    for &a in &attrs {
        let mut values: Vec<f64> = members.iter().map(|&i| rows[i][a]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = midpoint(pair[0], pair[1]);
            let mut left = vec![0u64; n_classes];
            for &i in &members {
                if rows[i][a] <= threshold {
                    left[labels[i]] += weights[i] as u64;
                }
            }
            let lt: u64 = left.iter().sum();
            let rt = total - lt;
            if lt < min_leaf || rt < min_leaf {
                continue;
            }
            let right: Vec<u64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let decrease = gini(&parent, total)
                - (lt as f64 / total as f64) * gini(&left, lt)
                - (rt as f64 / total as f64) * gini(&right, rt);
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

/// Recursive tree grower built on [`brute_force_split`], drawing candidate
/// attributes from `rng` in the same preorder as the library.
pub fn brute_force_tree<R: Rng + ?Sized>(case: &SplitCase, cfg: &ForestConfig, rng: &mut R) -> Tree {
    fn grow<R: Rng + ?Sized>(
        case: &SplitCase,
        cfg: &ForestConfig,
        weights: Vec<u32>,
        depth: usize,
        rng: &mut R,
        nodes: &mut Vec<TreeNode>,
    ) {
        let mut counts = vec![0u64; case.n_classes];
        for (i, &w) in weights.iter().enumerate() {
            counts[case.labels[i]] += w as u64;
        }
        let total: u64 = counts.iter().sum();
        let d = case.rows.first().map_or(0, Vec::len);
        let min_leaf = cfg.min_leaf.max(1) as u64;
        let stop = counts.iter().filter(|&&c| c > 0).count() < 2
            || cfg.max_depth.is_some_and(|m| depth >= m)
            || total < 2 * min_leaf
            || d == 0;
        if stop {
            nodes.push(TreeNode::Leaf { class_counts: counts });
            return;
        }
        let attrs = sample_attributes(rng, d, cfg.resolve_mtry(d));
        let Some(split) = brute_force_split(&case.rows, &case.labels, &weights, &attrs, case.n_classes, min_leaf) else {
            nodes.push(TreeNode::Leaf { class_counts: counts });
            return;
        };
        let id = nodes.len();
        nodes.push(TreeNode::Internal {
            attribute: split.attribute,
            threshold: split.threshold,
            left: id + 1,
            right: 0,
            decrease: split.decrease,
            weight: total,
        });
        let side = |go_left: bool| -> Vec<u32> {
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| if (case.rows[i][split.attribute] <= split.threshold) == go_left { w } else { 0 })
                .collect()
        };
        grow(case, cfg, side(true), depth + 1, rng, nodes);
        let right_id = nodes.len();
        if let TreeNode::Internal { right, .. } = &mut nodes[id] {
            *right = right_id;
        }
        grow(case, cfg, side(false), depth + 1, rng, nodes);
    }
    let mut nodes = Vec::new();
    grow(case, cfg, case.weights.clone(), 0, rng, &mut nodes);
    Tree { nodes }
}
