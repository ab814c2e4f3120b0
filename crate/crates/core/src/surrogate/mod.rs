//! ReLU regression surrogates: normalization, forward pass and training.

mod network;
mod scaler;
mod train;

pub use network::{Architecture, Layer, ReluNetwork};
pub use scaler::{fit_scalers, AffineScaler};
pub use train::{train, train_in_box, train_rows, train_with_report, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("need at least 2 successful samples to train, got {0}")]
    TooFewSamples(usize),
    #[error("invalid architecture {0:?}: 1 to 4 hidden layers, each at least 1 neuron")]
    InvalidArchitecture(Vec<usize>),
    #[error("invalid training configuration")]
    InvalidTrainConfig,
    #[error("layer dimensions do not chain")]
    LayerChain,
    #[error("scaler scales must be strictly positive")]
    NonPositiveScale,
    #[error("input arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("network serialization: {0}")]
    Serialization(String),
}
