//! Runs an experiment manifest and prints the resulting tables.
//!
//! ```text
//! cargo run --release --example replicate_tables -- manifests/acceptance.toml /tmp/bundle
//! ```

use convforest::eval::{run_experiment_suite_with, CellOutcome, Manifest};

fn main() -> convforest::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or("manifests/acceptance.toml", String::as_str);
    let manifest = Manifest::load(path)?;
    let bundle = run_experiment_suite_with(&manifest, |cell| match cell {
        CellOutcome::Ok(r) => eprintln!("done {} / {}", r.dataset, r.pipeline),
        CellOutcome::Failed { dataset, pipeline, error, .. } => eprintln!("failed {dataset} / {pipeline}: {error}"),
    })?;
    if let Some(dir) = args.get(1) {
        let tables = bundle.write(dir)?;
        eprintln!("bundle written, tables at {}", tables.display());
    }
    print!("{}", bundle.tables_md);
    Ok(())
}
