use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use super::{Cli, CliError, Command};
use crate::data::{load_dataset, ClassColumn, Dataset, GridPolicy, GridShape, Preprocessing};
use crate::dcnn::{extract_features, predict_dcnn, train_with, FeatureMatrix, GridSet, InitPolicy, NetworkConfig, TrainedNetwork};
use crate::eval::{paired_ttest, run_experiment_suite_with, CellOutcome, EvalReport, Manifest, Protocol};
use crate::frf::{feature_importance, fit_forest, importance_csv, oob_error, predict_forest, Forest, ForestConfig};

type Outcome = Result<String, CliError>;

const DEFAULT_SEED: u64 = 1;

pub(super) fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Inspect { .. } => "inspect",
        Command::TrainDcnn { .. } => "train-dcnn",
        Command::Extract { .. } => "extract",
        Command::TrainFrf { .. } => "train-frf",
        Command::Predict { .. } => "predict",
        Command::Experiment { .. } => "experiment",
        Command::Ttest { .. } => "ttest",
    }
}

pub(super) fn dispatch(cli: &Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let out = Out {
        json: cli.json,
        command: name(&cli.command),
    };
    match &cli.command {
        Command::Inspect { dataset, class } => inspect(&out, dataset, class.as_deref()),
        Command::TrainDcnn {
            dataset,
            out: path,
            class,
            preset,
            config,
            grid,
            epochs,
            lr,
            momentum,
            batch_size,
            input_dropout,
            hidden_dropout,
            dense_units,
            init,
        } => {
            let mut cfg = match config {
                Some(p) => read_network_config(p)?,
                None => NetworkConfig::preset(preset).map_err(|e| CliError::from_lib("--preset", e))?,
            };
            cfg.seed = seed;
            if let Some(v) = epochs {
                cfg.epochs = *v;
            }
            if let Some(v) = lr {
                cfg.learning_rate = *v;
            }
            if let Some(v) = momentum {
                cfg.momentum = *v;
            }
            if let Some(v) = batch_size {
                cfg.batch_size = *v;
            }
            if let Some(v) = input_dropout {
                cfg.input_dropout = *v;
            }
            if let Some(v) = hidden_dropout {
                cfg.hidden_dropout = *v;
            }
            if let Some(v) = dense_units {
                cfg.dense_units = *v;
            }
            if let Some(v) = init {
                cfg.init_scale = v.parse::<InitPolicy>().map_err(|e| CliError::from_lib("--init", e))?;
            }
            let policy: GridPolicy = grid.parse().map_err(|e| CliError::from_lib("--grid", e))?;
            train_dcnn(&out, dataset, class.as_deref(), cfg, policy, path)
        }
        Command::Extract {
            dataset,
            model,
            out: path,
            class,
        } => extract(&out, dataset, class.as_deref(), model, path),
        Command::TrainFrf {
            input,
            out: path,
            class,
            trees,
            mtry,
            min_leaf,
            max_depth,
            importance,
        } => {
            let cfg = ForestConfig {
                n_trees: *trees,
                mtry: *mtry,
                min_leaf: *min_leaf,
                max_depth: *max_depth,
                seed,
            };
            train_frf(&out, input, class.as_deref(), &cfg, path.as_deref(), importance.as_deref())
        }
        Command::Predict {
            dataset,
            network,
            forest,
            out: path,
            class,
        } => predict(&out, dataset, class.as_deref(), network.as_deref(), forest.as_deref(), path.as_deref()),
        Command::Experiment {
            manifest,
            out: dir,
            no_timing,
            all_rows,
        } => {
            let opts = ExperimentFlags {
                no_timing: *no_timing,
                all_rows: *all_rows,
                seed: cli.seed,
                threads: cli.threads,
            };
            experiment(&out, manifest, dir.as_deref(), &opts)
        }
        Command::Ttest { a, b } => ttest(&out, a, b),
    }
}

/// Chooses between the text and the JSON rendering of a result.
struct Out {
    json: bool,
    command: &'static str,
}

impl Out {
    fn finish(&self, mut record: Value, text: String) -> Outcome {
        if self.json {
            if let Value::Object(map) = &mut record {
                map.insert("command".into(), Value::from(self.command));
            }
            Ok(format!("{record}\n"))
        } else {
            Ok(text)
        }
    }
}

fn load(path: &Path, class: Option<&str>) -> Result<Dataset, CliError> {
    load_dataset(path, &ClassColumn::from_option(class)).map_err(|e| match e {
        crate::Error::Io { .. } => CliError::from_lib("dataset", e),
        other => CliError::from_lib(path.display(), other),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn read_network_config(path: &Path) -> Result<NetworkConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn inspect(out: &Out, path: &Path, class: Option<&str>) -> Outcome {
    let ds = load(path, class)?;
    let grid = GridShape::square(ds.n_attributes());
    let counts = ds.class_counts();
    let mut text = String::new();
    let _ = writeln!(text, "dataset     {} ({})", ds.name, path.display());
    let _ = writeln!(text, "instances   {}", ds.n_instances());
    let _ = writeln!(text, "attributes  {}", ds.n_attributes());
    let _ = writeln!(text, "classes     {} (class attribute {:?})", ds.n_classes(), ds.class_attribute);
    let _ = writeln!(text, "missing     {} cells", ds.missing_count());
    let _ = writeln!(text, "grid        {}x{}", grid.height, grid.width);
    let width = ds.class_names.iter().map(String::len).max().unwrap_or(0);
    for (name, n) in ds.class_names.iter().zip(&counts) {
        let _ = writeln!(text, "  {name:<width$}  {n}");
    }
    let record = json!({
        "dataset": ds.name,
        "path": path.display().to_string(),
        "instances": ds.n_instances(),
        "attributes": ds.n_attributes(),
        "classes": ds.n_classes(),
        "class_attribute": ds.class_attribute,
        "class_counts": ds.class_names.iter().zip(&counts)
            .map(|(c, n)| json!({"class": c, "count": n})).collect::<Vec<_>>(),
        "missing_cells": ds.missing_count(),
        "grid": {"height": grid.height, "width": grid.width},
    });
    out.finish(record, text)
}

fn train_dcnn(
    out: &Out,
    path: &Path,
    class: Option<&str>,
    cfg: NetworkConfig,
    policy: GridPolicy,
    checkpoint: &Path,
) -> Outcome {
    cfg.validate().map_err(|e| CliError::from_lib("network config", e))?;
    let ds = load(path, class)?;
    let shape = policy.resolve(ds.n_attributes(), cfg.min_input_side());
    cfg.shape_chain(shape.height, shape.width)
        .map_err(|e| CliError::from_lib(format!("network {} on {}", cfg.layers_label(), path.display()), e))?;
    let all: Vec<usize> = (0..ds.n_instances()).collect();
    let prep = Preprocessing::fit(&ds, &all).map_err(|e| CliError::from_lib(path.display(), e))?;
    let prepared = prep.apply(&ds).map_err(|e| CliError::from_lib(path.display(), e))?;
    let grid = GridSet::from_dataset(&prepared, shape).map_err(|e| CliError::from_lib(path.display(), e))?;

    let start = Instant::now();
    let every = (cfg.epochs / 10).max(1);
    let epochs = cfg.epochs;
    let mut net = train_with(&grid, &cfg, |epoch, loss| {
        if (epoch + 1) % every == 0 || epoch + 1 == epochs {
            eprintln!("epoch {:>4}/{epochs}  loss {loss:.5}", epoch + 1);
        }
    })
    .map_err(|e| CliError::from_lib(path.display(), e))?;
    let seconds = start.elapsed().as_secs_f64();
    net.preprocessing = Some(prep);
    net.class_names = ds.class_names.clone();
    net.save(checkpoint).map_err(|e| CliError::from_lib("--out", e))?;

    let final_loss = net.loss_history.last().copied().unwrap_or(f64::NAN);
    let text = format!(
        "checkpoint  {}\nlayers      {} on a {}x{} grid\nfinal loss  {final_loss:.5} after {} epochs (learning rate {})\nwall time   {seconds:.2}s\n",
        checkpoint.display(),
        cfg.layers_label(),
        shape.height,
        shape.width,
        cfg.epochs,
        cfg.learning_rate
    );
    let record = json!({
        "checkpoint": checkpoint.display().to_string(),
        "layers": cfg.layers_label(),
        "grid": {"height": shape.height, "width": shape.width},
        "epochs": cfg.epochs,
        "learning_rate": cfg.learning_rate,
        "final_loss": final_loss,
        "seconds": seconds,
    });
    out.finish(record, text)
}

fn load_network(path: &Path) -> Result<TrainedNetwork, CliError> {
    TrainedNetwork::load(path).map_err(|e| CliError::from_lib(path.display(), e))
}

fn load_forest(path: &Path) -> Result<Forest, CliError> {
    Forest::load(path).map_err(|e| CliError::from_lib(path.display(), e))
}

fn network_features(net: &TrainedNetwork, model: &Path, ds: &Dataset, path: &Path) -> Result<(GridSet, FeatureMatrix), CliError> {
    let grid = net.prepare(ds).map_err(|e| {
        CliError::from_lib(format!("{} does not fit checkpoint {}", path.display(), model.display()), e)
    })?;
    let x = extract_features(net, &grid).map_err(|e| CliError::from_lib(path.display(), e))?;
    Ok((grid, x))
}

fn extract(out: &Out, path: &Path, class: Option<&str>, model: &Path, target: &Path) -> Outcome {
    let net = load_network(model)?;
    let ds = load(path, class)?;
    let (grid, x) = network_features(&net, model, &ds, path)?;
    let csv = x
        .to_csv(&grid.labels, &ds.class_names)
        .map_err(|e| CliError::from_lib(path.display(), e))?;
    write_file(target, &csv)?;
    let text = format!("wrote {} rows x {} features to {}\n", x.rows, x.cols, target.display());
    let record = json!({"features": target.display().to_string(), "rows": x.rows, "columns": x.cols});
    out.finish(record, text)
}

fn raw_features(ds: &Dataset, path: &Path) -> Result<FeatureMatrix, CliError> {
    if ds.has_missing() {
        return Err(CliError::user(format!(
            "{}: {} missing cells; the forest needs complete rows",
            path.display(),
            ds.missing_count()
        )));
    }
    FeatureMatrix::from_dataset(ds).map_err(|e| CliError::from_lib(path.display(), e))
}

fn train_frf(
    out: &Out,
    path: &Path,
    class: Option<&str>,
    cfg: &ForestConfig,
    model: Option<&Path>,
    importance: Option<&Path>,
) -> Outcome {
    let ds = load(path, class)?;
    let x = raw_features(&ds, path)?;
    let mut forest = fit_forest(&x, &ds.labels, ds.n_classes(), cfg).map_err(|e| CliError::from_lib(path.display(), e))?;
    forest.class_names = ds.class_names.clone();
    let oob = oob_error(&forest, &ds.labels).map_err(|e| CliError::from_lib(path.display(), e))?;
    let scores = feature_importance(&forest);
    if let Some(m) = model {
        forest.save(m).map_err(|e| CliError::from_lib("--out", e))?;
    }
    if let Some(p) = importance {
        write_file(p, &importance_csv(&ds.attribute_names, &scores))?;
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let top: Vec<usize> = order.into_iter().take(10).collect();
    let mtry = cfg.resolve_mtry(x.cols);
    let mut text = format!(
        "{} trees, {mtry} of {} attributes per split, {} rows\nOOB error   {:.4} ({} rows scored)\ntop attributes by importance:\n",
        cfg.n_trees,
        x.cols,
        x.rows,
        oob.error,
        oob.rows_scored
    );
    for &i in &top {
        let _ = writeln!(text, "  {:<16} {:.4}", ds.attribute_names[i], scores[i]);
    }
    if let Some(m) = model {
        let _ = writeln!(text, "model       {}", m.display());
    }
    let record = json!({
        "trees": cfg.n_trees,
        "mtry": mtry,
        "rows": x.rows,
        "features": x.cols,
        "oob_error": oob.error,
        "oob_rows_scored": oob.rows_scored,
        "importance": top.iter().map(|&i| json!({"attribute": ds.attribute_names[i], "score": scores[i]})).collect::<Vec<_>>(),
        "model": model.map(|m| m.display().to_string()),
    });
    out.finish(record, text)
}

fn predict(
    out: &Out,
    path: &Path,
    class: Option<&str>,
    network: Option<&Path>,
    forest: Option<&Path>,
    target: Option<&Path>,
) -> Outcome {
    if network.is_none() && forest.is_none() {
        return Err(CliError::user("predict: give --network, --forest or both"));
    }
    let net = network.map(load_network).transpose()?;
    let forest_model = forest.map(load_forest).transpose()?;
    let ds = load(path, class)?;

    let predicted: Vec<String> = match (&net, &forest_model) {
        (Some(n), None) => {
            let grid = n.prepare(&ds).map_err(|e| {
                CliError::from_lib(format!("{} does not fit checkpoint {}", path.display(), network.unwrap().display()), e)
            })?;
            let idx = predict_dcnn(n, &grid).map_err(|e| CliError::from_lib(path.display(), e))?;
            idx.into_iter().map(|i| n.class_names[i].clone()).collect()
        }
        (net, Some(f)) => {
            let x = match net {
                Some(n) => network_features(n, network.unwrap(), &ds, path)?.1,
                None => raw_features(&ds, path)?,
            };
            let idx = predict_forest(f, &x).map_err(|e| CliError::from_lib(forest.unwrap().display(), e))?;
            idx.into_iter().map(|i| f.class_names[i].clone()).collect()
        }
        (None, None) => unreachable!(),
    };
    let actual: Vec<&str> = ds.labels.iter().map(|&l| ds.class_names[l].as_str()).collect();
    let correct = predicted.iter().zip(&actual).filter(|(p, a)| p == *a).count();
    let accuracy = correct as f64 / predicted.len() as f64;
    if let Some(t) = target {
        let mut csv = String::from("row,predicted,actual\n");
        for (i, (p, a)) in predicted.iter().zip(&actual).enumerate() {
            let _ = writeln!(csv, "{i},{p},{a}");
        }
        write_file(t, &csv)?;
    }
    let mut text = format!("accuracy {:.2}% ({correct} of {} rows)\n", 100.0 * accuracy, predicted.len());
    if let Some(t) = target {
        let _ = writeln!(text, "predictions written to {}", t.display());
    }
    let mut record = json!({"rows": predicted.len(), "correct": correct, "accuracy": accuracy});
    match target {
        Some(t) => record["predictions_file"] = Value::from(t.display().to_string()),
        None => record["predictions"] = Value::from(predicted),
    }
    out.finish(record, text)
}

struct ExperimentFlags {
    no_timing: bool,
    all_rows: bool,
    seed: Option<u64>,
    threads: Option<usize>,
}

fn experiment(out: &Out, path: &Path, dir: Option<&Path>, flags: &ExperimentFlags) -> Outcome {
    let mut manifest = Manifest::load(path).map_err(|e| CliError::from_lib(path.display(), e))?;
    if let Some(s) = flags.seed {
        manifest.seeds = vec![s];
    }
    if flags.no_timing {
        manifest.record_timing = false;
    }
    if flags.all_rows {
        for p in &mut manifest.pipelines {
            p.protocol = Protocol::AllRows;
        }
    }
    if flags.threads.is_some() {
        manifest.threads = flags.threads;
    }
    let dir: PathBuf = match dir {
        Some(d) => d.to_path_buf(),
        None => {
            let stem = path.file_stem().map_or("experiment".into(), |s| s.to_string_lossy().into_owned());
            manifest.base_dir.join("results").join(stem)
        }
    };
    let total = manifest.datasets.len() * manifest.pipelines.len() * manifest.seeds.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let bundle = run_experiment_suite_with(&manifest, |cell| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        match cell {
            CellOutcome::Ok(r) => eprintln!(
                "[{n}/{total}] {} / {}: {:.2}%",
                r.dataset,
                r.pipeline,
                100.0 * r.mean_accuracy
            ),
            CellOutcome::Failed { dataset, pipeline, error, .. } => {
                eprintln!("[{n}/{total}] {dataset} / {pipeline}: failed: {error}")
            }
        }
    })
    .map_err(|e| CliError::from_lib(path.display(), e))?;
    let tables = bundle.write(&dir).map_err(|e| CliError::from_lib("--out", e))?;
    let failed: Vec<Value> = bundle
        .cells
        .iter()
        .filter_map(|c| match c {
            CellOutcome::Failed { dataset, pipeline, seed, error } => {
                Some(json!({"dataset": dataset, "pipeline": pipeline, "seed": seed, "error": error}))
            }
            CellOutcome::Ok(_) => None,
        })
        .collect();
    if bundle.succeeded() == 0 {
        return Err(CliError::user(format!("{}: all {total} cells failed", path.display())));
    }
    let text = format!(
        "{} of {total} cells succeeded\ntables  {}\n",
        bundle.succeeded(),
        tables.display()
    );
    let record = json!({
        "tables": tables.display().to_string(),
        "bundle": dir.display().to_string(),
        "cells": total,
        "succeeded": bundle.succeeded(),
        "failed": failed,
    });
    out.finish(record, text)
}

/// Fold accuracies from a comma list or from a report file.
fn accuracies(arg: &str) -> Result<Vec<f64>, CliError> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{arg}: {e}")))?;
        let report: EvalReport = match serde_json::from_str::<CellOutcome>(&text) {
            Ok(CellOutcome::Ok(r)) => r,
            Ok(CellOutcome::Failed { error, .. }) => {
                return Err(CliError::user(format!("{arg}: report of a failed cell ({error})")))
            }
            Err(_) => serde_json::from_str(&text).map_err(|e| CliError::user(format!("{arg}: {e}")))?,
        };
        return report
            .per_fold_accuracy
            .iter()
            .enumerate()
            .map(|(f, a)| a.ok_or_else(|| CliError::user(format!("{arg}: fold {f} was not scored"))))
            .collect();
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::user(format!("{arg}: {s:?} is not a number")))
        })
        .collect()
}

fn ttest(out: &Out, a: &str, b: &str) -> Outcome {
    let xs = accuracies(a)?;
    let ys = accuracies(b)?;
    let r = paired_ttest(&xs, &ys).map_err(|e| CliError::from_lib(format!("{a} vs {b}"), e))?;
    let text = format!(
        "paired t-test over {} pairs\nmean difference  {:.6}\nt                {:.4}\ndf               {}\np (two-tailed)   {:.4}\n{}\n",
        xs.len(),
        r.mean_difference,
        r.t,
        r.df,
        r.p_value,
        if r.significant_at_05 {
            "significant at 0.05"
        } else {
            "not significant at 0.05"
        }
    );
    let record = serde_json::to_value(r).map_err(|e| CliError {
        code: 2,
        message: e.to_string(),
    })?;
    out.finish(record, text)
}
