use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::argmax;
use super::network::{sgd_momentum_step, Masks, Network};
use super::{FeatureMatrix, NetworkConfig, Tensor3};
use crate::data::{to_grid_with, Dataset, GridShape, Preprocessing};
use crate::error::{Error, Result};
use crate::rng;

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Rows of a dataset laid out on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    pub shape: GridShape,
    pub inputs: Vec<Tensor3>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl GridSet {
    /// Every row must be free of missing values (impute first).
    pub fn from_dataset(ds: &Dataset, shape: GridShape) -> Result<GridSet> {
        let inputs = ds
            .instances
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "row {i} of {} has unimputed missing values",
                        ds.name
                    )));
                }
                to_grid_with(row, shape)
            })
            .collect::<Result<_>>()?;
        Ok(GridSet {
            shape,
            inputs,
            labels: ds.labels.clone(),
            n_classes: ds.n_classes(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub config: NetworkConfig,
    pub grid: GridShape,
    pub class_names: Vec<String>,
    pub network: Network,
    /// Mean training cross-entropy of every epoch.
    pub loss_history: Vec<f64>,
    /// Fitted on the training rows; applied to raw rows before gridding.
    pub preprocessing: Option<Preprocessing>,
}

pub fn train(data: &GridSet, cfg: &NetworkConfig) -> Result<TrainedNetwork> {
    train_with(data, cfg, |_, _| {})
}

/// Minibatch momentum SGD on the mean cross-entropy, calling `on_epoch`
/// with the zero-based epoch index and its mean loss.
pub fn train_with(
    data: &GridSet,
    cfg: &NetworkConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedNetwork> {
    cfg.validate()?;
    cfg.shape_chain(data.shape.height, data.shape.width)?;
    if data.is_empty() {
        return Err(Error::EmptyFile);
    }
    if data.n_classes < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            found: data.n_classes,
        });
    }
    if let Some(x) = data.inputs.iter().find(|x| x.shape() != (1, data.shape.height, data.shape.width)) {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} does not match grid {}x{}",
            x.shape(),
            data.shape.height,
            data.shape.width
        )));
    }

    let (h, w) = (data.shape.height, data.shape.width);
    let mut net = Network::init(cfg, h, w, data.n_classes, &mut rng::stream(cfg.seed, INIT_STREAM))?;
    let mut velocity = net.zeros_like();
    let mut shuffle_rng = rng::stream(cfg.seed, SHUFFLE_STREAM);
    let mut dropout_rng = rng::stream(cfg.seed, DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<&Tensor3> = batch.iter().map(|&i| &data.inputs[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let masks: Vec<Masks> = batch
                .iter()
                .map(|_| {
                    Masks::sample(
                        h * w,
                        cfg.dense_units,
                        cfg.input_dropout,
                        cfg.hidden_dropout,
                        &mut dropout_rng,
                    )
                })
                .collect();
            let (loss, grads) = net.batch_gradients(&inputs, &labels, &masks)?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss {
                    epoch,
                    learning_rate: cfg.learning_rate,
                });
            }
            sgd_momentum_step(&mut net, &grads, &mut velocity, cfg.learning_rate, cfg.momentum)?;
            total += loss * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || !net.is_finite() {
            return Err(Error::DivergedLoss {
                epoch,
                learning_rate: cfg.learning_rate,
            });
        }
        loss_history.push(mean);
        on_epoch(epoch, mean);
    }

    Ok(TrainedNetwork {
        config: cfg.clone(),
        grid: data.shape,
        class_names: (0..data.n_classes).map(|c| c.to_string()).collect(),
        network: net,
        loss_history,
        preprocessing: None,
    })
}

impl TrainedNetwork {
    fn check_grid(&self, data: &GridSet) -> Result<()> {
        if data.shape != self.grid {
            return Err(Error::ShapeMismatch(format!(
                "network was trained on a {}x{} grid, data is {}x{}",
                self.grid.height, self.grid.width, data.shape.height, data.shape.width
            )));
        }
        Ok(())
    }

    /// Class probabilities of every row (inference mode).
    pub fn predict_proba(&self, data: &GridSet) -> Result<Vec<Vec<f64>>> {
        self.check_grid(data)?;
        data.inputs
            .par_iter()
            .map(|x| Ok(self.network.infer(x)?.probabilities()))
            .collect()
    }

    /// Applies the stored preprocessing and grid layout to raw rows.
    pub fn prepare(&self, ds: &Dataset) -> Result<GridSet> {
        let ds = match &self.preprocessing {
            Some(p) => p.apply(ds)?,
            None => ds.clone(),
        };
        GridSet::from_dataset(&ds, self.grid)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            network: self,
        };
        serde_json::to_string(&file).map_err(|e| Error::json("serializing network", e))
    }

    pub fn from_json(text: &str) -> Result<TrainedNetwork> {
        let file: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::json("reading network checkpoint", e))?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "not a network checkpoint (format {:?} version {})",
                file.format, file.version
            )));
        }
        Ok(file.network)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedNetwork> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedNetwork::from_json(&text)
    }
}

const CHECKPOINT_FORMAT: &str = "convforest-network";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    version: u32,
    network: &'a TrainedNetwork,
}

#[derive(Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    network: TrainedNetwork,
}

/// Post-ReLU activations of the dense layer for every row, dropout off.
pub fn extract_features(net: &TrainedNetwork, data: &GridSet) -> Result<FeatureMatrix> {
    net.check_grid(data)?;
    let rows: Vec<Vec<f64>> = data
        .inputs
        .par_iter()
        .map(|x| Ok(net.network.infer(x)?.features()))
        .collect::<Result<_>>()?;
    FeatureMatrix::from_rows(&rows, format!("dense-relu({})", net.config.dense_units))
}

/// Most probable class of every row; the lowest index wins ties.
pub fn predict_dcnn(net: &TrainedNetwork, data: &GridSet) -> Result<Vec<usize>> {
    Ok(net.predict_proba(data)?.iter().map(|p| argmax(p)).collect())
}
