//! Fully-connected residual networks: parameters, exact backpropagation,
//! SGD training and checkpoints.

pub mod arch;
pub mod checkpoint;
pub mod network;
pub mod train;

pub use arch::{Activation, Architecture, DeltaMode};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use network::{Delta, Gradients, ResNet};
pub use train::{sgd_train, TrainConfig, TrainHistory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResNetError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite hidden state at layer {layer}")]
    NonFiniteState { layer: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged (non-finite loss) at update {update}")]
    Diverged { update: usize },
}
