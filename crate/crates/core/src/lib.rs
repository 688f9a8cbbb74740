//! Convolutional feature extraction for tabular data, followed by a random
//! forest that searches splits over presorted attribute index lists.
//!
//! Rows are laid out on a zero-padded square grid, a small convolutional
//! network is trained on them, and the activations of its dense layer feed
//! the forest. The [`eval`] module runs stratified cross-validation of whole
//! pipelines and compares them with a paired t-test.

pub mod cli;
pub mod data;
pub mod dcnn;
pub mod error;
pub mod eval;
pub mod frf;
pub mod rng;

pub use data::{Dataset, GridShape};
pub use dcnn::{FeatureMatrix, NetworkConfig, Tensor3, TrainedNetwork};
pub use error::{Error, Result};
