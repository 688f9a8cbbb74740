use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{confusion_matrix, trace};
use crate::data::{stratified_kfold, Dataset, GridPolicy, GridShape, Preprocessing};
use crate::dcnn::{extract_features, predict_dcnn, train, FeatureMatrix, GridSet, NetworkConfig, TrainedNetwork};
use crate::error::{Error, Result};
use crate::frf::{fit_forest, oob_error, predict_forest, Forest, ForestConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineKind {
    /// The network's own softmax head.
    #[serde(rename = "standalone-dcnn")]
    StandaloneDcnn,
    /// A forest grown on the network's dense-layer activations.
    #[serde(rename = "dcnn+frf")]
    DcnnFrf,
    /// A forest grown on the preprocessed attributes themselves.
    #[serde(rename = "frf-raw")]
    FrfRaw,
}

impl PipelineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::StandaloneDcnn => "standalone-dcnn",
            PipelineKind::DcnnFrf => "dcnn+frf",
            PipelineKind::FrfRaw => "frf-raw",
        }
    }

    pub fn uses_network(self) -> bool {
        self != PipelineKind::FrfRaw
    }

    pub fn uses_forest(self) -> bool {
        self != PipelineKind::StandaloneDcnn
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standalone-dcnn" => Ok(PipelineKind::StandaloneDcnn),
            "dcnn+frf" => Ok(PipelineKind::DcnnFrf),
            "frf-raw" => Ok(PipelineKind::FrfRaw),
            _ => Err(Error::InvalidConfig(format!(
                "unknown pipeline kind {s:?} (expected standalone-dcnn, dcnn+frf or frf-raw)"
            ))),
        }
    }
}

/// Where the network of a `dcnn+frf` pipeline is trained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Preprocessing and network fitted on each training portion.
    #[default]
    PerFold,
    /// One network trained on every row before the folds are drawn; only the
    /// forest is cross-validated. Standalone pipelines ignore this.
    AllRows,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-fold" => Ok(Protocol::PerFold),
            "all-rows" => Ok(Protocol::AllRows),
            _ => Err(Error::InvalidConfig(format!(
                "unknown protocol {s:?} (expected per-fold or all-rows)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    pub kind: PipelineKind,
    /// Its seed is replaced by one derived from the run seed and fold.
    pub network: NetworkConfig,
    pub forest: ForestConfig,
    pub grid: GridPolicy,
    pub protocol: Protocol,
    /// Times a diverged training run is repeated at a tenth of the rate.
    pub lr_retries: usize,
}

impl PipelineSpec {
    pub fn new(name: impl Into<String>, kind: PipelineKind) -> Self {
        PipelineSpec {
            name: name.into(),
            kind,
            network: NetworkConfig::default(),
            forest: ForestConfig::default(),
            grid: GridPolicy::FitNetwork,
            protocol: Protocol::PerFold,
            lr_retries: 2,
        }
    }

    pub fn standalone(network: NetworkConfig) -> Self {
        PipelineSpec {
            network,
            ..Self::new("standalone-dcnn", PipelineKind::StandaloneDcnn)
        }
    }

    pub fn dcnn_frf(network: NetworkConfig, forest: ForestConfig) -> Self {
        PipelineSpec {
            network,
            forest,
            ..Self::new("dcnn+frf", PipelineKind::DcnnFrf)
        }
    }

    pub fn frf_raw(forest: ForestConfig) -> Self {
        PipelineSpec {
            forest,
            ..Self::new("frf-raw", PipelineKind::FrfRaw)
        }
    }

    fn protocol(&self) -> Protocol {
        match self.kind {
            PipelineKind::DcnnFrf => self.protocol,
            _ => Protocol::PerFold,
        }
    }

    fn grid_for(&self, d: usize) -> GridShape {
        self.grid.resolve(d, self.network.min_input_side())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvOptions {
    /// When off, every time field is reported as zero so reruns compare equal.
    pub record_timing: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { record_timing: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub pipeline: String,
    pub kind: PipelineKind,
    pub protocol: Protocol,
    pub attributes: usize,
    pub instances: usize,
    pub classes: usize,
    /// Attributes drawn per split, for pipelines with a forest.
    pub random_features: Option<usize>,
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    /// `None` for a fold whose network kept diverging.
    pub per_fold_accuracy: Vec<Option<f64>>,
    /// Correct predictions over scored rows, pooled across folds.
    pub mean_accuracy: f64,
    pub train_time_seconds: f64,
    pub per_fold_seconds: Vec<f64>,
    /// Mean out-of-bag error of the per-fold forests.
    pub oob_error: Option<f64>,
    pub per_fold_oob_error: Vec<Option<f64>>,
    /// Learning rate the network finally trained with, per fold.
    pub learning_rates: Vec<Option<f64>>,
    /// Summed over the scored folds; rows are true classes.
    pub confusion: Vec<Vec<u64>>,
    pub config_fingerprint: String,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn failed_folds(&self) -> Vec<usize> {
        (0..self.k).filter(|&f| self.per_fold_accuracy[f].is_none()).collect()
    }

    /// Accuracies of the scored folds, weighted by fold size.
    pub fn weighted_fold_mean(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (a, &n) in self.per_fold_accuracy.iter().zip(&self.fold_sizes) {
            if let Some(a) = a {
                num += a * n as f64;
                den += n as f64;
            }
        }
        num / den
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("report", e))
    }
}

/// Hex SHA-256 prefix identifying a pipeline run on a dataset.
pub fn config_fingerprint(ds: &Dataset, pipeline: &PipelineSpec, k: usize, seed: u64) -> Result<String> {
    let key = serde_json::json!({
        "dataset": ds.name,
        "instances": ds.n_instances(),
        "attributes": ds.n_attributes(),
        "classes": ds.n_classes(),
        "pipeline": pipeline,
        "k": k,
        "seed": seed,
    });
    let bytes = serde_json::to_vec(&key).map_err(|e| Error::json("fingerprint", e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

struct FoldResult {
    predictions: Vec<usize>,
    seconds: f64,
    oob: Option<f64>,
    learning_rate: Option<f64>,
}

/// Trains, retrying at a tenth of the learning rate after a divergence.
/// `Ok(None)` means every attempt diverged.
fn train_retrying(
    grid: &GridSet,
    cfg: &NetworkConfig,
    retries: usize,
    label: &str,
    notes: &mut Vec<String>,
) -> Result<Option<TrainedNetwork>> {
    let mut cfg = cfg.clone();
    for attempt in 0..=retries {
        match train(grid, &cfg) {
            Ok(net) => return Ok(Some(net)),
            Err(Error::DivergedLoss { epoch, learning_rate }) => {
                if attempt < retries {
                    notes.push(format!(
                        "{label}: diverged at epoch {epoch} with learning rate {learning_rate}, retrying at {}",
                        learning_rate / 10.0
                    ));
                    cfg.learning_rate /= 10.0;
                } else {
                    notes.push(format!(
                        "{label}: diverged at epoch {epoch} with learning rate {learning_rate}; fold not scored"
                    ));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn seconds_since(t: Instant, record: bool) -> f64 {
    if record {
        t.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

fn forest_config(pipeline: &PipelineSpec, seed: u64, fold: usize) -> ForestConfig {
    ForestConfig {
        seed: derive_seed(seed, &[fold as u64, 1]),
        ..pipeline.forest.clone()
    }
}

/// Network trained on every row for the all-rows protocol, with its
/// preprocessing and training time.
struct SharedNetwork {
    net: Option<TrainedNetwork>,
    seconds: f64,
}

/// Stratified `k`-fold cross-validation of `pipeline` on `ds`.
pub fn cross_validate(ds: &Dataset, pipeline: &PipelineSpec, k: usize, seed: u64) -> Result<EvalReport> {
    cross_validate_with(ds, pipeline, k, seed, &CvOptions::default())
}

pub fn cross_validate_with(
    ds: &Dataset,
    pipeline: &PipelineSpec,
    k: usize,
    seed: u64,
    opts: &CvOptions,
) -> Result<EvalReport> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("cross-validation needs k >= 2, got {k}")));
    }
    ds.validate()?;
    if pipeline.kind.uses_network() {
        pipeline.network.validate()?;
        let shape = pipeline.grid_for(ds.n_attributes());
        pipeline.network.shape_chain(shape.height, shape.width)?;
    }
    if pipeline.kind.uses_forest() {
        pipeline.forest.validate()?;
    }
    let plan = stratified_kfold(&ds.labels, k, seed)?;
    let c = ds.n_classes();
    let mut notes = Vec::new();

    let shared = if pipeline.protocol() == Protocol::AllRows {
        let start = Instant::now();
        let all: Vec<usize> = (0..ds.n_instances()).collect();
        let prep = Preprocessing::fit(ds, &all)?;
        let grid = GridSet::from_dataset(&prep.apply(ds)?, pipeline.grid_for(ds.n_attributes()))?;
        let cfg = NetworkConfig {
            seed: derive_seed(seed, &[u64::MAX, 0]),
            ..pipeline.network.clone()
        };
        let mut net = train_retrying(&grid, &cfg, pipeline.lr_retries, "all rows", &mut notes)?;
        if let Some(n) = net.as_mut() {
            n.preprocessing = Some(prep);
        }
        notes.push("network trained once on every row; only the forest is cross-validated".into());
        Some(SharedNetwork {
            net,
            seconds: seconds_since(start, opts.record_timing),
        })
    } else {
        None
    };

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let r = match &shared {
            Some(s) => match &s.net {
                Some(net) => Some(all_rows_fold(ds, &plan.train_indices(f), &plan.test_indices(f), net, pipeline, seed, f, opts)?),
                None => None,
            },
            None => run_fold(ds, &plan.train_indices(f), &plan.test_indices(f), pipeline, seed, f, opts, &mut notes)?,
        };
        folds.push(r);
    }
    if folds.iter().all(Option::is_none) {
        return Err(Error::DivergedLoss {
            epoch: 0,
            learning_rate: pipeline.network.learning_rate / 10f64.powi(pipeline.lr_retries as i32),
        });
    }

    let mut confusion = vec![vec![0u64; c]; c];
    let mut per_fold_accuracy = Vec::with_capacity(k);
    let mut per_fold_oob_error = Vec::with_capacity(k);
    let mut per_fold_seconds = Vec::with_capacity(k);
    let mut learning_rates = Vec::with_capacity(k);
    let (mut correct, mut scored) = (0u64, 0u64);
    for (f, r) in folds.iter().enumerate() {
        let Some(r) = r else {
            per_fold_accuracy.push(None);
            per_fold_oob_error.push(None);
            per_fold_seconds.push(0.0);
            learning_rates.push(None);
            continue;
        };
        let truth: Vec<usize> = plan.test_indices(f).iter().map(|&i| ds.labels[i]).collect();
        let m = confusion_matrix(&r.predictions, &truth, c)?;
        let hits = trace(&m);
        correct += hits;
        scored += truth.len() as u64;
        for (row, add) in confusion.iter_mut().zip(&m) {
            for (x, y) in row.iter_mut().zip(add) {
                *x += y;
            }
        }
        per_fold_accuracy.push(Some(hits as f64 / truth.len() as f64));
        per_fold_oob_error.push(r.oob);
        per_fold_seconds.push(r.seconds);
        learning_rates.push(r.learning_rate);
    }
    let oobs: Vec<f64> = per_fold_oob_error.iter().flatten().copied().collect();
    let oob_error = (!oobs.is_empty()).then(|| oobs.iter().sum::<f64>() / oobs.len() as f64);
    let train_time_seconds = per_fold_seconds.iter().sum::<f64>() + shared.as_ref().map_or(0.0, |s| s.seconds);

    Ok(EvalReport {
        dataset: ds.name.clone(),
        pipeline: pipeline.name.clone(),
        kind: pipeline.kind,
        protocol: pipeline.protocol(),
        attributes: ds.n_attributes(),
        instances: ds.n_instances(),
        classes: c,
        random_features: pipeline.kind.uses_forest().then(|| {
            let f = match pipeline.kind {
                PipelineKind::FrfRaw => ds.n_attributes(),
                _ => pipeline.network.dense_units,
            };
            pipeline.forest.resolve_mtry(f)
        }),
        k,
        seed,
        fold_sizes: plan.fold_sizes(),
        per_fold_accuracy,
        mean_accuracy: correct as f64 / scored as f64,
        train_time_seconds,
        per_fold_seconds,
        oob_error,
        per_fold_oob_error,
        learning_rates,
        confusion,
        config_fingerprint: config_fingerprint(ds, pipeline, k, seed)?,
        notes,
    })
}

fn forest_stage(
    train_x: &FeatureMatrix,
    train_y: &[usize],
    test_x: &FeatureMatrix,
    c: usize,
    cfg: &ForestConfig,
) -> Result<(Vec<usize>, f64)> {
    let forest = fit_forest(train_x, train_y, c, cfg)?;
    let oob = oob_error(&forest, train_y)?;
    Ok((predict_forest(&forest, test_x)?, oob.error))
}

/// Everything fitted on one training portion.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub kind: PipelineKind,
    pub preprocessing: Preprocessing,
    pub grid: Option<GridShape>,
    pub network: Option<TrainedNetwork>,
    pub forest: Option<Forest>,
    /// Training rows' out-of-bag error, when there is a forest.
    pub oob_error: Option<f64>,
}

impl FittedPipeline {
    /// Predicted classes of `rows` of `ds`, in the order given.
    pub fn predict(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<usize>> {
        let prepared = self.preprocessing.apply(&ds.subset(rows))?;
        match (&self.network, &self.forest) {
            (None, Some(forest)) => predict_forest(forest, &FeatureMatrix::from_dataset(&prepared)?),
            (Some(net), forest) => {
                let grid = GridSet::from_dataset(&prepared, net.grid)?;
                match forest {
                    Some(f) => predict_forest(f, &extract_features(net, &grid)?),
                    None => predict_dcnn(net, &grid),
                }
            }
            (None, None) => Err(Error::InvalidArgument("pipeline has neither a network nor a forest".into())),
        }
    }
}

/// Fits `pipeline` on `train_rows` of `ds` with the randomness of `fold`.
/// Preprocessing statistics come from those rows only. `Ok(None)` means
/// the network diverged at every learning rate tried; `notes` says why.
pub fn fit_pipeline(
    ds: &Dataset,
    train_rows: &[usize],
    pipeline: &PipelineSpec,
    seed: u64,
    fold: usize,
    notes: &mut Vec<String>,
) -> Result<Option<FittedPipeline>> {
    let preprocessing = Preprocessing::fit(ds, train_rows)?;
    let train_ds = preprocessing.apply(&ds.subset(train_rows))?;
    let c = ds.n_classes();

    if pipeline.kind == PipelineKind::FrfRaw {
        let x = FeatureMatrix::from_dataset(&train_ds)?;
        let forest = fit_forest(&x, &train_ds.labels, c, &forest_config(pipeline, seed, fold))?;
        let oob = oob_error(&forest, &train_ds.labels)?.error;
        return Ok(Some(FittedPipeline {
            kind: pipeline.kind,
            preprocessing,
            grid: None,
            network: None,
            forest: Some(forest),
            oob_error: Some(oob),
        }));
    }

    let shape = pipeline.grid_for(ds.n_attributes());
    let train_grid = GridSet::from_dataset(&train_ds, shape)?;
    let cfg = NetworkConfig {
        seed: derive_seed(seed, &[fold as u64, 0]),
        ..pipeline.network.clone()
    };
    let Some(net) = train_retrying(&train_grid, &cfg, pipeline.lr_retries, &format!("fold {fold}"), notes)? else {
        return Ok(None);
    };
    let (forest, oob) = if pipeline.kind == PipelineKind::DcnnFrf {
        let x = extract_features(&net, &train_grid)?;
        let forest = fit_forest(&x, &train_grid.labels, c, &forest_config(pipeline, seed, fold))?;
        let oob = oob_error(&forest, &train_grid.labels)?.error;
        (Some(forest), Some(oob))
    } else {
        (None, None)
    };
    Ok(Some(FittedPipeline {
        kind: pipeline.kind,
        preprocessing,
        grid: Some(shape),
        network: Some(net),
        forest,
        oob_error: oob,
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    ds: &Dataset,
    train_rows: &[usize],
    test_rows: &[usize],
    pipeline: &PipelineSpec,
    seed: u64,
    fold: usize,
    opts: &CvOptions,
    notes: &mut Vec<String>,
) -> Result<Option<FoldResult>> {
    let start = Instant::now();
    let Some(fitted) = fit_pipeline(ds, train_rows, pipeline, seed, fold, notes)? else {
        return Ok(None);
    };
    let seconds = seconds_since(start, opts.record_timing);
    Ok(Some(FoldResult {
        predictions: fitted.predict(ds, test_rows)?,
        seconds,
        oob: fitted.oob_error,
        learning_rate: fitted.network.as_ref().map(|n| n.config.learning_rate),
    }))
}

#[allow(clippy::too_many_arguments)]
fn all_rows_fold(
    ds: &Dataset,
    train_rows: &[usize],
    test_rows: &[usize],
    net: &TrainedNetwork,
    pipeline: &PipelineSpec,
    seed: u64,
    fold: usize,
    opts: &CvOptions,
) -> Result<FoldResult> {
    let train_grid = net.prepare(&ds.subset(train_rows))?;
    let test_grid = net.prepare(&ds.subset(test_rows))?;
    let start = Instant::now();
    let train_x = extract_features(net, &train_grid)?;
    let test_x = extract_features(net, &test_grid)?;
    let cfg = forest_config(pipeline, seed, fold);
    let (predictions, oob) = forest_stage(&train_x, &train_grid.labels, &test_x, ds.n_classes(), &cfg)?;
    Ok(FoldResult {
        predictions,
        seconds: seconds_since(start, opts.record_timing),
        oob: Some(oob),
        learning_rate: Some(net.config.learning_rate),
    })
}
