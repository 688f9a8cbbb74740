use crate::error::{Error, Result};

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty prediction list".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `m[i][j]` counts rows of true class `i` predicted as `j`.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], c: usize) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut m = vec![vec![0u64; c]; c];
    for (&p, &t) in pred.iter().zip(truth) {
        if let Some(&label) = [p, t].iter().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        m[t][p] += 1;
    }
    Ok(m)
}

pub fn trace(m: &[Vec<u64>]) -> u64 {
    m.iter().enumerate().map(|(i, row)| row[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 1, 1]).unwrap(), 0.75);
        assert!(matches!(accuracy(&[0], &[0, 1]), Err(Error::LengthMismatch { .. })));
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let m = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(m, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let m = confusion_matrix(&[1, 1, 0], &[0, 1, 0], 2).unwrap();
        assert_eq!(m, vec![vec![1, 1], vec![0, 1]]);
        assert!(matches!(
            confusion_matrix(&[3], &[0], 3),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }

    proptest! {
        #[test]
        fn trace_over_total_is_accuracy(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let m = confusion_matrix(&pred, &truth, 4).unwrap();
            let total: u64 = m.iter().flatten().sum();
            prop_assert_eq!(total as usize, pred.len());
            let hits = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as u64;
            prop_assert_eq!(trace(&m), hits);
            prop_assert_eq!(trace(&m) as f64 / total as f64, accuracy(&pred, &truth).unwrap());
        }
    }
}
