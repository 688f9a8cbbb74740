//! The full two-stage pipeline on one train/test split: train the network,
//! tap its dense layer, grow the forest on those features, and compare the
//! forest with the network's own softmax head.
//!
//! ```text
//! cargo run --release --example dcnn_frf_pipeline -- data/pendigits.csv 0.0095 100 0.0
//! ```
//!
//! Arguments: dataset, learning rate, epochs, input dropout.

use std::time::Instant;

use convforest::data::{load_dataset, stratified_kfold, ClassColumn, GridPolicy, Preprocessing};
use convforest::dcnn::{extract_features, predict_dcnn, train, GridSet, NetworkConfig};
use convforest::frf::{feature_importance, fit_forest, oob_error, predict_forest, ForestConfig};

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

fn main() -> convforest::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or("data/segment.arff", String::as_str);
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0095);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let input_dropout: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.0);

    let ds = load_dataset(path, &ClassColumn::Last)?;
    let folds = stratified_kfold(&ds.labels, 5, 7)?;
    let (train_rows, test_rows) = (folds.train_indices(0), folds.test_indices(0));
    let prep = Preprocessing::fit(&ds, &train_rows)?;
    let train_ds = prep.apply(&ds.subset(&train_rows))?;
    let test_ds = prep.apply(&ds.subset(&test_rows))?;

    let cfg = NetworkConfig {
        learning_rate: lr,
        epochs,
        seed: 7,
        input_dropout,
        ..NetworkConfig::small()
    };
    let shape = GridPolicy::FitNetwork.resolve(ds.n_attributes(), cfg.min_input_side());
    let train_grid = GridSet::from_dataset(&train_ds, shape)?;
    let test_grid = GridSet::from_dataset(&test_ds, shape)?;

    let start = Instant::now();
    let net = train(&train_grid, &cfg)?;
    let dcnn_time = start.elapsed().as_secs_f64();
    let standalone = accuracy(&predict_dcnn(&net, &test_grid)?, &test_grid.labels);
    let start = Instant::now();
    let train_features = extract_features(&net, &train_grid)?;
    let forest_cfg = ForestConfig {
        seed: 7,
        ..ForestConfig::default()
    };
    let forest = fit_forest(&train_features, &train_grid.labels, ds.n_classes(), &forest_cfg)?;
    let frf_time = start.elapsed().as_secs_f64();
    let test_features = extract_features(&net, &test_grid)?;
    let combined = accuracy(&predict_forest(&forest, &test_features)?, &test_grid.labels);
    let oob = oob_error(&forest, &train_grid.labels)?;

    let importance = feature_importance(&forest);
    let used = importance.iter().filter(|&&v| v > 0.0).count();

    println!("{} ({} rows, grid {}x{})", ds.name, ds.n_instances(), shape.height, shape.width);
    println!("  network  {:.2}%  trained in {dcnn_time:.1}s, final loss {:.4}", 100.0 * standalone, net.loss_history.last().unwrap());
    println!("  +forest  {:.2}%  grown in {frf_time:.2}s, OOB error {:.4}", 100.0 * combined, oob.error);
    println!("  {used} of {} dense features used by the forest", importance.len());
    Ok(())
}
