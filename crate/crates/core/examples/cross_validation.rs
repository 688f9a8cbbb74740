//! Five-fold cross-validation of the forest alone and of the network
//! feeding the forest, with a paired t-test on the fold accuracies.
//!
//! ```text
//! cargo run --release --example cross_validation -- data/segment.arff 20
//! ```

use convforest::data::{load_dataset, ClassColumn};
use convforest::dcnn::NetworkConfig;
use convforest::eval::{cross_validate, paired_ttest, PipelineSpec};
use convforest::frf::ForestConfig;

fn main() -> convforest::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or("data/segment.arff", String::as_str);
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let ds = load_dataset(path, &ClassColumn::Last)?;

    let network = NetworkConfig {
        learning_rate: 0.0095,
        input_dropout: 0.0,
        epochs,
        ..NetworkConfig::small()
    };
    let pipelines = [
        PipelineSpec::frf_raw(ForestConfig::default()),
        PipelineSpec::dcnn_frf(network, ForestConfig::default()),
    ];

    let mut reports = Vec::new();
    for p in &pipelines {
        let r = cross_validate(&ds, p, 5, 1)?;
        let folds: Vec<String> = r
            .per_fold_accuracy
            .iter()
            .map(|a| a.map_or("-".into(), |a| format!("{:.2}", 100.0 * a)))
            .collect();
        println!(
            "{:<9} {:.2}%  folds [{}]  OOB {:.4}  {:.1}s",
            r.pipeline,
            100.0 * r.mean_accuracy,
            folds.join(", "),
            r.oob_error.unwrap_or(f64::NAN),
            r.train_time_seconds
        );
        reports.push(r);
    }

    let acc = |i: usize| -> Vec<f64> { reports[i].per_fold_accuracy.iter().flatten().copied().collect() };
    let t = paired_ttest(&acc(1), &acc(0))?;
    println!(
        "dcnn+frf minus frf-raw: {:+.2} points, t = {:.3}, p = {:.4}",
        100.0 * t.mean_difference,
        t.t,
        t.p_value
    );
    Ok(())
}
