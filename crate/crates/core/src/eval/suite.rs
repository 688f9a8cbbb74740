use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate_with, CvOptions, EvalReport, PipelineKind};
use super::manifest::Manifest;
use super::ttest::{paired_ttest, TTestResult};
use crate::error::{Error, Result};

/// Result of one (dataset, pipeline, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum CellOutcome {
    Ok(EvalReport),
    Failed {
        dataset: String,
        pipeline: String,
        seed: u64,
        error: String,
    },
}

impl CellOutcome {
    pub fn dataset(&self) -> &str {
        match self {
            CellOutcome::Ok(r) => &r.dataset,
            CellOutcome::Failed { dataset, .. } => dataset,
        }
    }

    pub fn pipeline(&self) -> &str {
        match self {
            CellOutcome::Ok(r) => &r.pipeline,
            CellOutcome::Failed { pipeline, .. } => pipeline,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            CellOutcome::Ok(r) => r.seed,
            CellOutcome::Failed { seed, .. } => *seed,
        }
    }

    pub fn report(&self) -> Option<&EvalReport> {
        match self {
            CellOutcome::Ok(r) => Some(r),
            CellOutcome::Failed { .. } => None,
        }
    }

    /// `reports/` file name: `<dataset>__<pipeline>__seed<seed>.json`, slugged.
    pub fn file_name(&self) -> String {
        format!("{}__{}__seed{}.json", slug(self.dataset()), slug(self.pipeline()), self.seed())
    }
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

/// Paired t-test of two pipelines' fold accuracies on one dataset and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestEntry {
    pub dataset: String,
    pub seed: u64,
    pub a: String,
    pub b: String,
    /// Folds scored by both pipelines.
    pub pairs: usize,
    pub result: Option<TTestResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub name: String,
    pub kind: PipelineKind,
    pub layers: Option<String>,
    pub all_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub name: String,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub record_timing: bool,
    pub pipelines: Vec<PipelineSummary>,
    /// Dataset-major, then pipeline, then seed, in manifest order.
    pub cells: Vec<CellOutcome>,
    pub ttests: Vec<TTestEntry>,
    pub tables_md: String,
}

impl ReportBundle {
    pub fn succeeded(&self) -> usize {
        self.cells.iter().filter(|c| c.report().is_some()).count()
    }

    pub fn report(&self, dataset: &str, pipeline: &str) -> Option<&EvalReport> {
        self.cells
            .iter()
            .filter_map(CellOutcome::report)
            .find(|r| r.dataset == dataset && r.pipeline == pipeline)
    }

    /// Writes `reports/*.json`, `ttests.json` and `tables.md` under `dir`
    /// and returns the path of `tables.md`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let reports = dir.join("reports");
        std::fs::create_dir_all(&reports).map_err(|e| Error::io(&reports, e))?;
        for cell in &self.cells {
            let path = reports.join(cell.file_name());
            let text = serde_json::to_string_pretty(cell).map_err(|e| Error::json("report", e))?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("ttests.json");
        let text = serde_json::to_string_pretty(&self.ttests).map_err(|e| Error::json("t-tests", e))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        let path = dir.join("tables.md");
        std::fs::write(&path, &self.tables_md).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn run_experiment_suite(manifest: &Manifest) -> Result<ReportBundle> {
    run_experiment_suite_with(manifest, |_| {})
}

/// Runs every cell, calling `on_cell` as each finishes (in completion order).
/// A failing cell is recorded and the rest still run.
pub fn run_experiment_suite_with(manifest: &Manifest, on_cell: impl Fn(&CellOutcome) + Sync) -> Result<ReportBundle> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = manifest.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_cells(manifest, &on_cell))
}

fn run_cells(manifest: &Manifest, on_cell: &(impl Fn(&CellOutcome) + Sync)) -> Result<ReportBundle> {
    let opts = CvOptions {
        record_timing: manifest.record_timing,
    };
    let datasets: Vec<_> = manifest.datasets.iter().map(|d| manifest.load_dataset(d)).collect();
    let mut cells = Vec::new();
    for (di, _) in manifest.datasets.iter().enumerate() {
        for (pi, _) in manifest.pipelines.iter().enumerate() {
            for &seed in &manifest.seeds {
                cells.push((di, pi, seed));
            }
        }
    }
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(di, pi, seed)| {
            let entry = &manifest.datasets[di];
            let pipeline = &manifest.pipelines[pi];
            let result = datasets[di]
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|ds| {
                    let spec = manifest.pipeline_spec(pipeline, entry).map_err(|e| e.to_string())?;
                    cross_validate_with(ds, &spec, manifest.k, seed, &opts).map_err(|e| e.to_string())
                });
            let outcome = match result {
                Ok(report) => CellOutcome::Ok(report),
                Err(error) => CellOutcome::Failed {
                    dataset: entry.name.clone(),
                    pipeline: pipeline.name.clone(),
                    seed,
                    error,
                },
            };
            on_cell(&outcome);
            outcome
        })
        .collect();

    let mut ttests = Vec::new();
    for entry in &manifest.datasets {
        for &seed in &manifest.seeds {
            for (i, a) in manifest.pipelines.iter().enumerate() {
                for b in &manifest.pipelines[i + 1..] {
                    ttests.push(ttest_entry(&outcomes, &entry.name, seed, &a.name, &b.name));
                }
            }
        }
    }

    let pipelines = manifest
        .pipelines
        .iter()
        .map(|p| {
            let spec = manifest.pipeline_spec(p, &manifest.datasets[0])?;
            Ok(PipelineSummary {
                name: p.name.clone(),
                kind: p.kind,
                layers: p.kind.uses_network().then(|| spec.network.layers_label()),
                all_rows: p.kind == PipelineKind::DcnnFrf && p.protocol == super::cv::Protocol::AllRows,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut bundle = ReportBundle {
        name: manifest.name.clone(),
        k: manifest.k,
        seeds: manifest.seeds.clone(),
        record_timing: manifest.record_timing,
        pipelines,
        cells: outcomes,
        ttests,
        tables_md: String::new(),
    };
    bundle.tables_md = render_tables(&bundle);
    Ok(bundle)
}

fn ttest_entry(cells: &[CellOutcome], dataset: &str, seed: u64, a: &str, b: &str) -> TTestEntry {
    let find = |p: &str| {
        cells
            .iter()
            .find(|c| c.dataset() == dataset && c.pipeline() == p && c.seed() == seed)
            .and_then(CellOutcome::report)
    };
    let mut entry = TTestEntry {
        dataset: dataset.to_string(),
        seed,
        a: a.to_string(),
        b: b.to_string(),
        pairs: 0,
        result: None,
        error: None,
    };
    let (Some(ra), Some(rb)) = (find(a), find(b)) else {
        entry.error = Some("a cell failed".into());
        return entry;
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = ra
        .per_fold_accuracy
        .iter()
        .zip(&rb.per_fold_accuracy)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    entry.pairs = xs.len();
    match paired_ttest(&xs, &ys) {
        Ok(r) => entry.result = Some(r),
        Err(e) => entry.error = Some(e.to_string()),
    }
    entry
}

/// The markdown summary: one table per pipeline with the columns of the
/// benchmark result tables, then the pairwise t-tests.
pub fn render_tables(bundle: &ReportBundle) -> String {
    let mut md = String::new();
    let multi_seed = bundle.seeds.len() > 1;
    let seeds: Vec<String> = bundle.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(md, "# {}\n", bundle.name);
    let _ = writeln!(
        md,
        "Stratified {}-fold cross-validation, seed{} {}. Accuracy is pooled over the folds.\n",
        bundle.k,
        if multi_seed { "s" } else { "" },
        seeds.join(", ")
    );

    for p in &bundle.pipelines {
        let mut title = format!("## {} ({}", p.name, p.kind);
        if let Some(layers) = &p.layers {
            let _ = write!(title, ", layers {layers}");
        }
        if p.all_rows {
            title.push_str(", network trained on all rows");
        }
        title.push(')');
        let _ = writeln!(md, "{title}\n");
        let seed_col = if multi_seed { " Seed |" } else { "" };
        let _ = writeln!(
            md,
            "| Dataset |{seed_col} Attributes | Instances | Random features | OOB error | Time (s) | Accuracy (%) |"
        );
        let _ = writeln!(md, "|---|{}---|---|---|---|---|---|", if multi_seed { "---|" } else { "" });
        let mut notes = Vec::new();
        for cell in bundle.cells.iter().filter(|c| c.pipeline() == p.name) {
            let seed = if multi_seed { format!(" {} |", cell.seed()) } else { String::new() };
            match cell {
                CellOutcome::Ok(r) => {
                    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
                    let time = if bundle.record_timing {
                        format!("{:.2}", r.train_time_seconds)
                    } else {
                        "-".into()
                    };
                    let _ = writeln!(
                        md,
                        "| {} |{seed} {} | {} | {} | {} | {time} | {:.2} |",
                        r.dataset,
                        r.attributes,
                        r.instances,
                        opt(r.random_features.map(|m| m.to_string())),
                        opt(r.oob_error.map(|e| format!("{e:.4}"))),
                        100.0 * r.mean_accuracy
                    );
                    notes.extend(r.notes.iter().map(|n| format!("{}: {n}", r.dataset)));
                }
                CellOutcome::Failed { dataset, error, .. } => {
                    let _ = writeln!(md, "| {dataset} |{seed} - | - | - | - | - | failed |");
                    notes.push(format!("{dataset}: {error}"));
                }
            }
        }
        md.push('\n');
        for n in notes {
            let _ = writeln!(md, "- {n}");
        }
        if !md.ends_with("\n\n") {
            md.push('\n');
        }
    }

    let _ = writeln!(md, "## Paired t-tests\n");
    let _ = writeln!(
        md,
        "Two-tailed paired t-test on per-fold accuracy; a pair differs significantly when p < 0.05.\n"
    );
    if bundle.ttests.is_empty() {
        let _ = writeln!(md, "Only one pipeline; nothing to compare.");
        return md;
    }
    let seed_col = if multi_seed { " Seed |" } else { "" };
    let _ = writeln!(
        md,
        "| Dataset |{seed_col} Pipeline A | Pipeline B | Mean A - B (pp) | t | df | p | p < 0.05 |"
    );
    let _ = writeln!(md, "|---|{}---|---|---|---|---|---|---|", if multi_seed { "---|" } else { "" });
    for t in &bundle.ttests {
        let seed = if multi_seed { format!(" {} |", t.seed) } else { String::new() };
        match (&t.result, &t.error) {
            (Some(r), _) => {
                let _ = writeln!(
                    md,
                    "| {} |{seed} {} | {} | {:.2} | {:.4} | {} | {:.4} | {} |",
                    t.dataset,
                    t.a,
                    t.b,
                    100.0 * r.mean_difference,
                    r.t,
                    r.df,
                    r.p_value,
                    if r.significant_at_05 { "yes" } else { "no" }
                );
            }
            (None, err) => {
                let _ = writeln!(
                    md,
                    "| {} |{seed} {} | {} | - | - | - | - | {} |",
                    t.dataset,
                    t.a,
                    t.b,
                    err.as_deref().unwrap_or("-")
                );
            }
        }
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_toy(dir: &Path) {
        let mut text = String::from("a,b,c,d,class\n");
        for i in 0..30 {
            let y = i % 3;
            let j = (i * 7 % 5) as f64 / 20.0;
            text.push_str(&format!("{},{},{},{},k{y}\n", y as f64 + j, j, 2.0 - y as f64, i % 4));
        }
        std::fs::write(dir.join("toy.csv"), text).unwrap();
    }

    const MANIFEST: &str = r#"
name = "toy suite"
k = 3
seeds = [5]
record_timing = false

[[dataset]]
name = "Toy"
path = "toy.csv"

[[dataset]]
name = "Missing"
path = "nowhere.csv"

[[pipeline]]
name = "forest"
kind = "frf-raw"
forest = { n_trees = 10 }

[[pipeline]]
name = "combo"
kind = "dcnn+frf"
layers = ["2-2-2-1-1"]
overrides = { epochs = 2, batch_size = 5, learning_rate = 0.05, dense_units = 6 }
forest = { n_trees = 10 }
"#;

    #[test]
    fn runs_cells_and_records_failures() {
        let dir = tempfile::tempdir().unwrap();
        write_toy(dir.path());
        let m = Manifest::parse(MANIFEST, dir.path()).unwrap();
        let seen = std::sync::atomic::AtomicUsize::new(0);
        let b = run_experiment_suite_with(&m, |_| {
            seen.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        })
        .unwrap();
        assert_eq!(seen.into_inner(), 4);
        assert_eq!(b.cells.len(), 4);
        assert_eq!(b.succeeded(), 2);
        assert_eq!(b.ttests.len(), 2);
        assert!(b.ttests[0].error.is_none());
        assert!(b.ttests[1].error.is_some());
        assert!(b.tables_md.contains("| Toy | 4 | 30 | 3 |"));
        assert!(b.tables_md.contains("| Missing | - | - | - | - | - | failed |"));
        assert!(!b.tables_md.contains('\u{2014}'));

        let again = run_experiment_suite(&m).unwrap();
        assert_eq!(b.tables_md, again.tables_md);
        assert_eq!(b.cells, again.cells);

        let out = dir.path().join("out");
        let tables = b.write(&out).unwrap();
        assert_eq!(std::fs::read_to_string(tables).unwrap(), b.tables_md);
        assert!(out.join("reports/toy__combo__seed5.json").exists());
        let failed = std::fs::read_to_string(out.join("reports/missing__forest__seed5.json")).unwrap();
        assert!(failed.contains("\"status\": \"failed\""));
        let ok = std::fs::read_to_string(out.join("reports/toy__forest__seed5.json")).unwrap();
        let back: CellOutcome = serde_json::from_str(&ok).unwrap();
        assert_eq!(&back, &b.cells[0]);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("dcnn+frf"), "dcnn-frf");
        assert_eq!(slug("Pen digits (UCI)"), "pen-digits-uci");
    }
}
