mod common;

use common::{brute_force_split, brute_force_tree, split_case};
use convforest::dcnn::FeatureMatrix;
use convforest::frf::{best_split, build_sorted_cache, grow_tree, sample_attributes, ForestConfig};
use convforest::rng;

#[test]
fn presorted_split_equals_brute_force() {
    for seed in 0..200 {
        let case = split_case(seed);
        let x = FeatureMatrix::from_rows(&case.rows, "case").unwrap();
        let cache = build_sorted_cache(&x);
        let mut r = rng::stream(seed, 5);
        let attrs = sample_attributes(&mut r, x.cols, case.mtry);
        let fast = best_split(&case.weights, &attrs, &cache, &case.labels, case.n_classes, case.min_leaf as u64);
        let slow = brute_force_split(&case.rows, &case.labels, &case.weights, &attrs, case.n_classes, case.min_leaf as u64);
        assert_eq!(fast, slow, "dataset {seed}");
    }
}

#[test]
fn grown_trees_equal_brute_force_trees() {
    for seed in 0..200 {
        let case = split_case(seed);
        let x = FeatureMatrix::from_rows(&case.rows, "case").unwrap();
        let cache = build_sorted_cache(&x);
        let cfg = ForestConfig {
            mtry: Some(case.mtry),
            min_leaf: case.min_leaf,
            max_depth: case.max_depth,
            ..ForestConfig::default()
        };
        let fast = grow_tree(&case.weights, &cache, &case.labels, case.n_classes, &cfg, &mut rng::stream(seed, 6));
        let slow = brute_force_tree(&case, &cfg, &mut rng::stream(seed, 6));
        assert_eq!(fast, slow, "dataset {seed}");
    }
}
