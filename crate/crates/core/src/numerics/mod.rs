//! Dense tensors, seeded random streams, smoothing and power-law fits.

pub mod fit;
pub mod rng;
pub mod smooth;
pub mod tensor;

pub use fit::{loglog_fit, PowerLawFit};
pub use rng::{gaussian_matrix, gaussian_vector, stream_id, RngStream};
pub use smooth::{default_window, smooth_series};
pub use tensor::{frobenius_norm, Mat, Tensor, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("non-finite entry")]
    NonFinite,
    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("log-log fit needs strictly positive coordinates, got ({x}, {y})")]
    NonPositive { x: f64, y: f64 },
    #[error("all abscissae are equal")]
    DegenerateAbscissae,
    #[error("smoothing window {window} must be odd and within 1..={len}")]
    InvalidWindow { window: usize, len: usize },
}
