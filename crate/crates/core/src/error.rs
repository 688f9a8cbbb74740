use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header at line {line}: {message}")]
    MalformedHeader { line: usize, message: String },

    #[error("line {line}: unknown nominal value {value:?} for attribute {attribute:?}")]
    UnknownNominalValue {
        line: usize,
        attribute: String,
        value: String,
    },

    #[error("line {line}: expected {expected} values, found {found}")]
    RowArityMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: class value is missing")]
    MissingClass { line: usize },

    #[error("line {line}: cannot parse {value:?} as a number")]
    BadNumber { line: usize, value: String },

    #[error("file contains no data rows")]
    EmptyFile,

    #[error("dataset needs at least {needed} classes, found {found}")]
    TooFewClasses { needed: usize, found: usize },

    #[error("attribute {attribute:?} has no observed values in the fitting rows")]
    AllMissingColumn { attribute: String },

    #[error("cannot make {k} folds from {n} instances")]
    KTooLarge { k: usize, n: usize },

    #[error("patch {patch_h}x{patch_w} does not fit a {height}x{width} input")]
    PatchTooLarge {
        patch_h: usize,
        patch_w: usize,
        height: usize,
        width: usize,
    },

    #[error("pool {pool_h}x{pool_w} is larger than the {height}x{width} input")]
    PoolLargerThanInput {
        pool_h: usize,
        pool_w: usize,
        height: usize,
        width: usize,
    },

    #[error("conv layer {layer} ({spec}) leaves no spatial extent on a {height}x{width} input")]
    ShapeChain {
        layer: usize,
        spec: String,
        height: usize,
        width: usize,
    },

    #[error("training diverged at epoch {epoch} with learning rate {learning_rate}")]
    DivergedLoss { epoch: usize, learning_rate: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("gini impurity of an empty node")]
    EmptyNode,

    #[error("mtry {mtry} exceeds the {features} available features")]
    MtryTooLarge { mtry: usize, features: usize },

    #[error("no row received an out-of-bag vote")]
    NoOobVotes,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {label} is outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("paired differences have zero variance and nonzero mean {mean}")]
    ZeroVariance { mean: f64 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
