use serde::{Deserialize, Serialize};

use crate::diagnostics::tensor::WeightTensor;
use crate::diagnostics::DiagnosticsError;
use crate::numerics::fit::{loglog_fit, PowerLawFit};
use crate::numerics::tensor::Tensor;
use crate::scalar::Scalar;

/// The four depth-scaling norms of a tensor `w ∈ R^{L x d x d}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Norms {
    /// `max_k |w_k|_F`
    pub maximum_norm: f64,
    /// `L^β max_k |w_{k+1} - w_k|_F`
    pub scaled_increment_norm: f64,
    /// `|Σ_k w_k|_F`
    pub cumulative_sum_norm: f64,
    /// `(Σ_k |w_k|_F^2)^{1/2}`
    pub root_sum_squares: f64,
    pub beta_used: f64,
    /// `max_k |w_{k+1} - w_k|_F` before the `L^β` factor.
    pub max_increment: f64,
}

impl Table1Norms {
    /// Same norms with the increment rescaled for another β.
    pub fn with_beta(&self, depth: usize, beta: f64) -> Self {
        Self {
            scaled_increment_norm: (depth as f64).powf(beta) * self.max_increment,
            beta_used: beta,
            ..*self
        }
    }
}

pub fn table1_norms<T: Scalar>(
    w: &WeightTensor<T>,
    beta: f64,
) -> Result<Table1Norms, DiagnosticsError> {
    let l = w.depth();
    if l < 2 {
        return Err(DiagnosticsError::TooShallow {
            depth: l,
            needed: 2,
        });
    }
    let e = w.entries();
    let maximum_norm = e.iter().map(|m| m.norm().as_f64()).fold(0.0, f64::max);
    let max_increment = e
        .windows(2)
        .map(|p| p[1].minus(&p[0]).norm().as_f64())
        .fold(0.0, f64::max);
    let mut sum = e[0].zeros_like();
    for m in e {
        sum.axpy(T::one(), m);
    }
    let rss = e.iter().map(|m| m.norm_sq().as_f64()).sum::<f64>().sqrt();
    Ok(Table1Norms {
        maximum_norm,
        scaled_increment_norm: (l as f64).powf(beta) * max_increment,
        cumulative_sum_norm: sum.norm().as_f64(),
        root_sum_squares: rss,
        beta_used: beta,
        max_increment,
    })
}

/// A fitted scaling exponent and the regression it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub fit: PowerLawFit,
}

pub(crate) const MIN_DEPTHS: usize = 3;

fn fit_sweep(points: &[(f64, f64)]) -> Result<PowerLawFit, DiagnosticsError> {
    if points.len() < MIN_DEPTHS {
        return Err(DiagnosticsError::TooFewDepths {
            needed: MIN_DEPTHS,
            got: points.len(),
        });
    }
    Ok(loglog_fit(points)?)
}

/// `α = -slope` of `max_k |δ_k|` against depth.
pub fn estimate_alpha(delta_max_norms: &[(f64, f64)]) -> Result<ExponentFit, DiagnosticsError> {
    let fit = fit_sweep(delta_max_norms)?;
    Ok(ExponentFit {
        exponent: -fit.slope,
        fit,
    })
}

/// `β = clamp(1 - slope, 0, 1)` from the cumulative-sum norms, which grow
/// like `L^{1-β}`.
pub fn estimate_beta(cumsum_norms: &[(f64, f64)]) -> Result<ExponentFit, DiagnosticsError> {
    let fit = fit_sweep(cumsum_norms)?;
    Ok(ExponentFit {
        exponent: (1.0 - fit.slope).clamp(0.0, 1.0),
        fit,
    })
}

/// Log-log slope of the β-scaled increment norms. Returns `-inf` when some
/// depth has zero increments (constant-in-depth layers).
pub fn increment_slope(scaled_increment_norms: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    if scaled_increment_norms.len() < MIN_DEPTHS {
        return Err(DiagnosticsError::TooFewDepths {
            needed: MIN_DEPTHS,
            got: scaled_increment_norms.len(),
        });
    }
    if scaled_increment_norms.iter().any(|&(_, v)| v <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(fit_sweep(scaled_increment_norms)?.slope)
}

/// Plain log-log slope, `-inf` if any value is zero.
pub fn sweep_slope(points: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    increment_slope(points)
}
