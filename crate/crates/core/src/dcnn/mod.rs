//! Convolutional network over gridded rows: layers, configuration,
//! training, feature extraction and checkpoints.

mod config;
mod features;
pub mod layers;
mod network;
mod tensor;
mod train;

pub use config::{ConvLayerSpec, InitPolicy, NetworkConfig};
pub use features::FeatureMatrix;
pub use layers::{
    conv_backward, conv_forward, cross_entropy, dense_softmax_forward, dropout_apply, maxpool_backward,
    maxpool_forward, relu_backward, relu_forward, softmax, DenseLayer, DropoutMask, PoolRecord,
};
pub use network::{sgd_momentum_step, sgd_momentum_update, ConvLayer, ForwardTrace, Masks, Network};
pub use tensor::Tensor3;
pub use train::{extract_features, predict_dcnn, train, train_with, GridSet, TrainedNetwork};
