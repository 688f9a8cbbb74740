//! Loads a dataset, summarizes it, and shows how one row lands on the grid
//! the network sees.
//!
//! ```text
//! cargo run --release --example load_and_grid -- data/segment.arff
//! ```

use convforest::data::{load_dataset, to_grid_with, ClassColumn, GridPolicy, Preprocessing};
use convforest::dcnn::NetworkConfig;

fn main() -> convforest::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/segment.arff".into());
    let ds = load_dataset(&path, &ClassColumn::Last)?;
    println!(
        "{}: {} rows, {} attributes, {} classes, {} missing cells",
        ds.name,
        ds.n_instances(),
        ds.n_attributes(),
        ds.n_classes(),
        ds.missing_count()
    );
    for (name, n) in ds.class_names.iter().zip(ds.class_counts()) {
        println!("  {name:<12} {n}");
    }

    let all: Vec<usize> = (0..ds.n_instances()).collect();
    let scaled = Preprocessing::fit(&ds, &all)?.apply(&ds)?;

    for policy in [GridPolicy::Square, GridPolicy::FitNetwork] {
        let shape = policy.resolve(ds.n_attributes(), NetworkConfig::small().min_input_side());
        let grid = to_grid_with(&scaled.instances[0], shape)?;
        println!("\nrow 0 as a {}x{} grid ({policy:?}):", shape.height, shape.width);
        for y in 0..shape.height {
            let cells: Vec<String> = (0..shape.width).map(|x| format!("{:4.2}", grid.get(0, y, x))).collect();
            println!("  {}", cells.join(" "));
        }
    }
    Ok(())
}
