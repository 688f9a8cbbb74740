//! Trains the convolutional network on one dataset and reports its held-out
//! accuracy.
//!
//! ```text
//! cargo run --release --example train_dcnn -- data/segment.arff small 20
//! ```

use std::time::Instant;

use convforest::data::{load_dataset, stratified_kfold, ClassColumn, GridPolicy, Preprocessing};
use convforest::dcnn::{predict_dcnn, train_with, GridSet, NetworkConfig};

fn main() -> convforest::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or("data/segment.arff", String::as_str);
    let preset = args.get(1).map_or("small", String::as_str);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.0095);

    let ds = load_dataset(path, &ClassColumn::Last)?;
    let cfg = NetworkConfig {
        epochs,
        learning_rate: lr,
        seed: 1,
        ..NetworkConfig::preset(preset)?
    };

    // Hold out one fifth of the rows.
    let folds = stratified_kfold(&ds.labels, 5, 1)?;
    let (train_rows, test_rows) = (folds.train_indices(0), folds.test_indices(0));
    let prep = Preprocessing::fit(&ds, &train_rows)?;
    let shape = GridPolicy::FitNetwork.resolve(ds.n_attributes(), cfg.min_input_side());
    let train = GridSet::from_dataset(&prep.apply(&ds.subset(&train_rows))?, shape)?;
    let test = GridSet::from_dataset(&prep.apply(&ds.subset(&test_rows))?, shape)?;
    println!(
        "{}: {} train / {} test rows, {} attributes on a {}x{} grid, layers {}",
        ds.name,
        train.len(),
        test.len(),
        ds.n_attributes(),
        shape.height,
        shape.width,
        cfg.layers_label()
    );

    let start = Instant::now();
    let net = train_with(&train, &cfg, |epoch, loss| {
        println!("epoch {:>3}  loss {loss:.5}  ({:.1}s)", epoch + 1, start.elapsed().as_secs_f64());
    })?;
    let pred = predict_dcnn(&net, &test)?;
    let correct = pred.iter().zip(&test.labels).filter(|(p, t)| p == t).count();
    println!(
        "held-out accuracy {:.2}% after {:.1}s",
        100.0 * correct as f64 / test.len() as f64,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
