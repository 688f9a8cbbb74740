//! The paired t-test on two sets of fold accuracies, and the p-values of a
//! few critical values.

use convforest::eval::{paired_ttest, student_t_two_tailed};

fn main() -> convforest::Result<()> {
    let a = [0.962, 0.957, 0.970, 0.948, 0.966];
    let b = [0.951, 0.949, 0.962, 0.950, 0.955];
    let r = paired_ttest(&a, &b)?;
    println!("mean difference {:+.4}", r.mean_difference);
    println!("t = {:.4} with {} degrees of freedom", r.t, r.df);
    println!(
        "p = {:.4}: {}",
        r.p_value,
        if r.significant_at_05 { "significant at 0.05" } else { "not significant at 0.05" }
    );

    println!("\ntwo-tailed 5% critical values:");
    for (df, t) in [(1, 12.706), (4, 2.776), (10, 2.228), (30, 2.042)] {
        println!("  df {df:>2}  t {t:>6}  p {:.4}", student_t_two_tailed(t, df));
    }
    Ok(())
}
