use crate::datasets::{DataError, Dataset, DatasetKind, Provenance};
use crate::numerics::rng::{stream_id, RngStream};
use crate::numerics::tensor::{Tensor, Vector};
use crate::scalar::Scalar;

const STREAM_SYNTHETIC: u64 = 0x5359_4e54;

pub const SYNTHETIC_DIM: usize = 10;
pub const SYNTHETIC_STEPS: usize = 100;

/// Runs the forcing recursion
/// `z_k = z_{k-1} + K^{-1/2} tanh(sin(5kπ/K) z_{k-1} + cos(5kπ/K) 1)` for
/// `k = 1..=K` from `z_0 = x` and returns `z_K`.
pub fn synthetic_trajectory_end<T: Scalar>(x: &Vector<T>, k_steps: usize) -> Vector<T> {
    let kf = T::from_usize_lossy(k_steps);
    let step = T::one() / kf.sqrt();
    let five_pi = T::lit(5.0) * T::PI();
    let mut z = x.clone();
    for k in 1..=k_steps {
        let phase = five_pi * T::from_usize_lossy(k) / kf;
        let (s, c) = (phase.sin(), phase.cos());
        for zi in z.as_mut_slice() {
            *zi = *zi + step * (s * *zi + c).tanh();
        }
    }
    z
}

/// `n` inputs uniform on `[-1, 1]^d` with unit-norm targets `z_K / |z_K|`.
pub fn generate_synthetic<T: Scalar>(
    seed: u64,
    n: usize,
    d: usize,
    k_steps: usize,
) -> Result<Dataset<T>, DataError> {
    if n == 0 || d == 0 || k_steps == 0 {
        return Err(DataError::InvalidParameter(format!(
            "synthetic dataset needs n, d, k_steps >= 1 (got {n}, {d}, {k_steps})"
        )));
    }
    let mut rng = RngStream::new(seed, stream_id(&[STREAM_SYNTHETIC]));
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let x = Vector::from_fn(d, |_| T::lit(rng.uniform_in(-1.0, 1.0)));
        let z = synthetic_trajectory_end(&x, k_steps);
        let norm = z.norm();
        if norm == T::zero() || !norm.is_finite() {
            return Err(DataError::DegenerateTarget { index: i });
        }
        targets.push(z.scaled(T::one() / norm));
        inputs.push(x);
    }
    Dataset::new(
        inputs,
        targets,
        Provenance {
            kind: DatasetKind::Synthetic,
            seed,
            params: vec![
                ("n".into(), n.to_string()),
                ("d".into(), d.to_string()),
                ("k_steps".into(), k_steps.to_string()),
            ],
        },
    )
}
