use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    /// Mean of `a − b`.
    pub mean_difference: f64,
    pub significant_at_05: bool,
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom:
/// `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn student_t_two_tailed(t: f64, df: usize) -> f64 {
    let v = df as f64;
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    beta_reg(v / 2.0, 0.5, v / (v + t * t)).clamp(0.0, 1.0)
}

/// Paired Student t-test on `a[i] − b[i]`.
///
/// Identical samples give `t = 0, p = 1`. Constant nonzero differences have
/// no defined statistic and are reported as [`Error::ZeroVariance`].
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let ss: f64 = d.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    let df = n - 1;
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(TTestResult {
                t: 0.0,
                df,
                p_value: 1.0,
                mean_difference: 0.0,
                significant_at_05: false,
            });
        }
        return Err(Error::ZeroVariance { mean });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let p_value = student_t_two_tailed(t, df);
    Ok(TTestResult {
        t,
        df,
        p_value,
        mean_difference: mean,
        significant_at_05: p_value < 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples_convention() {
        let r = paired_ttest(&[0.9, 0.8, 0.7], &[0.9, 0.8, 0.7]).unwrap();
        assert_eq!((r.t, r.df, r.p_value), (0.0, 2, 1.0));
        assert!(!r.significant_at_05);
    }

    #[test]
    fn constant_shift_is_an_error() {
        assert!(matches!(
            paired_ttest(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance { .. })
        ));
    }

    #[test]
    fn hand_computed_statistic() {
        // d = [1, -1, 1, -1, 2]: mean 0.4, sample sd sqrt(1.8), t = 0.4 / 0.6.
        let a = [1.0, -1.0, 1.0, -1.0, 2.0];
        let r = paired_ttest(&a, &[0.0; 5]).unwrap();
        assert_eq!(r.df, 4);
        assert!((r.t - 0.4 / 0.6).abs() < 1e-12);
        assert!((r.mean_difference - 0.4).abs() < 1e-15);
        // Two-tailed tail of t(4) at 2/3, from standard tables: 0.5415.
        assert!((r.p_value - 0.5415).abs() < 5e-4);
        assert!(!r.significant_at_05);
    }

    #[test]
    fn antisymmetric() {
        let a = [0.91, 0.88, 0.95, 0.90];
        let b = [0.89, 0.87, 0.91, 0.92];
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn p_decreases_with_t() {
        let mut last = 1.0;
        for i in 1..50 {
            let p = student_t_two_tailed(i as f64 * 0.25, 4);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0]).is_err());
    }
}
