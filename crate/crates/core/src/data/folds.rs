use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Assignment of every instance to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold split: each class's instances are shuffled with the
/// seeded stream and dealt round-robin, continuing the rotation from one
/// class to the next so fold sizes also differ by at most one.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng::stream(seed, 0);
    let mut assignments = vec![0; n];
    let mut next = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_two_class_case() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let plan = stratified_kfold(&labels, 5, 11).unwrap();
        for f in 0..5 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 1);
        }
        assert_eq!(plan, stratified_kfold(&labels, 5, 11).unwrap());
    }

    #[test]
    fn leave_one_out() {
        let plan = stratified_kfold(&[0, 1, 0, 1, 0, 1], 6, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![1; 6]);
    }

    #[test]
    fn too_many_folds() {
        assert!(matches!(
            stratified_kfold(&[0, 1, 0], 5, 0),
            Err(Error::KTooLarge { k: 5, n: 3 })
        ));
        assert!(stratified_kfold(&[0, 1, 0], 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn class_balance_holds(
            labels in prop::collection::vec(0usize..4, 2..120),
            k_seed in 0usize..1000,
            seed in any::<u64>(),
        ) {
            let n = labels.len();
            let k = 2 + k_seed % (n - 1);
            let plan = stratified_kfold(&labels, k, seed).unwrap();
            prop_assert_eq!(plan.assignments.len(), n);
            for c in 0..4 {
                let total = labels.iter().filter(|&&l| l == c).count() as f64;
                for f in 0..k {
                    let in_fold = (0..n)
                        .filter(|&i| labels[i] == c && plan.assignments[i] == f)
                        .count() as f64;
                    prop_assert!((in_fold - total / k as f64).abs() <= 1.0);
                }
            }
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
