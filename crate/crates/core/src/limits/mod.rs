//! Deep-network limits of the residual recursion: Itô-process weights, the
//! discrete recursion they drive, Euler–Maruyama and RK4 for the limit
//! equations, and coupled strong-error measurement.

mod grid;
pub mod path;
pub mod schemes;
pub mod spec;
pub mod sweep;

pub use path::{sample_driving_path, DrivingPath};
pub use schemes::{
    discrete_hidden_states, euler_maruyama, euler_maruyama_with, integrate_limit_ode,
    integrate_ode, limit_drift, rk4,
};
pub use spec::{q_form, ConstantSpec, ItoSpec, LimitRegime, SmoothActivation, Tensor4};
pub use sweep::{
    ito_correction_check, strong_error_sweep, ConvergenceRow, ConvergenceTable, ItoCheck,
    LimitMode, SweepConfig,
};

use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LimitsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no limit is implemented for α = {alpha}, β = {beta}")]
    UnsupportedRegime { alpha: f64, beta: f64 },
    #[error("non-finite state at layer {layer}")]
    NonFiniteState { layer: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
