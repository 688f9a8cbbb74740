//! A forest grown directly on a dataset's attributes: OOB error, held-out
//! accuracy, and the attributes that carried the splits.
//!
//! ```text
//! cargo run --release --example fast_random_forest -- data/pendigits.csv 100
//! ```

use std::time::Instant;

use convforest::data::{load_dataset, stratified_kfold, ClassColumn, Preprocessing};
use convforest::dcnn::FeatureMatrix;
use convforest::eval::accuracy;
use convforest::frf::{default_mtry, feature_importance, fit_forest, oob_error, predict_forest, ForestConfig};

fn main() -> convforest::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or("data/pendigits.csv", String::as_str);
    let trees: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);

    let ds = load_dataset(path, &ClassColumn::Last)?;
    let folds = stratified_kfold(&ds.labels, 5, 3)?;
    let (train_rows, test_rows) = (folds.train_indices(0), folds.test_indices(0));
    let prep = Preprocessing::fit(&ds, &train_rows)?;
    let train = prep.apply(&ds.subset(&train_rows))?;
    let test = prep.apply(&ds.subset(&test_rows))?;

    let cfg = ForestConfig {
        n_trees: trees,
        seed: 3,
        ..ForestConfig::default()
    };
    let start = Instant::now();
    let forest = fit_forest(&FeatureMatrix::from_dataset(&train)?, &train.labels, ds.n_classes(), &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let pred = predict_forest(&forest, &FeatureMatrix::from_dataset(&test)?)?;

    println!(
        "{}: {trees} trees, {} of {} attributes per split, grown in {elapsed:.2}s",
        ds.name,
        default_mtry(ds.n_attributes()),
        ds.n_attributes()
    );
    println!("  OOB error          {:.4}", oob_error(&forest, &train.labels)?.error);
    println!("  held-out accuracy  {:.2}%", 100.0 * accuracy(&pred, &test.labels)?);
    let leaves: usize = forest.trees.iter().map(|t| t.n_leaves()).sum();
    println!("  {:.0} leaves per tree on average", leaves as f64 / trees as f64);

    let imp = feature_importance(&forest);
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]));
    println!("  most used attributes:");
    for &j in order.iter().take(5) {
        println!("    {:<12} {:.3}", ds.attribute_names[j], imp[j]);
    }
    Ok(())
}
