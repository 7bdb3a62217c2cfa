//! Depth-scaling diagnostics of trained weights: norm sweeps, fitted
//! exponents, trend/noise decomposition, quadratic variation and the regime
//! classifier. Everything applies equally to weight and bias tensors.

pub mod decompose;
pub mod denoise;
pub mod norms;
pub mod planted;
pub mod regime;
pub mod report;
pub mod tensor;

pub use decompose::{decompose, quadratic_variation, Decomposition};
pub use denoise::{denoise_network, denoised_loss, DenoisedLoss};
pub use norms::{
    estimate_alpha, estimate_beta, increment_slope, table1_norms, ExponentFit, Table1Norms,
};
pub use regime::{classify_regime, Regime, RegimeInputs, RegimeThresholds};
pub use report::{
    diagnose_family, diagnose_networks, DepthRow, DiagnosticsConfig, FamilyReport, ScalingReport,
    WindowRule,
};
pub use tensor::{total_scaling, TensorKind, WeightTensor};

use crate::numerics::NumericsError;
use crate::resnet::ResNetError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("empty input")]
    Empty,
    #[error("depth {depth} is too shallow (need at least {needed} layers)")]
    TooShallow { depth: usize, needed: usize },
    #[error("need at least {needed} distinct depths, got {got}")]
    TooFewDepths { needed: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("smoothing window {window} must be odd and within 1..={depth}")]
    InvalidWindow { window: usize, depth: usize },
    #[error("networks do not share one architecture: {0}")]
    MixedArchitectures(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Network(#[from] ResNetError),
}
