use crate::diagnostics::tensor::WeightTensor;
use crate::diagnostics::DiagnosticsError;
use crate::numerics::smooth::smooth_series;
use crate::numerics::tensor::{Mat, Tensor};
use crate::scalar::Scalar;

/// Split of a weight tensor into a smooth trend and a noise path:
/// `w_k = L^{-β} trend_k + (noise_path_{k+1} - noise_path_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<T> {
    /// Samples of the limit function at `k/L`, on the `O(1)` scale.
    pub trend: Vec<Mat<T>>,
    /// Noise path at `k/L` for `k = 0..=L`, starting at zero.
    pub noise_path: Vec<Mat<T>>,
    pub beta: f64,
    pub window: usize,
    /// `sup_k |noise_path_k| / sup_k |S_k|` with `S_k = Σ_{j<k} w_j`.
    pub noise_fraction: f64,
}

impl<T: Scalar> Decomposition<T> {
    pub fn depth(&self) -> usize {
        self.trend.len()
    }

    /// `w_k - L^{-β} trend_k`.
    pub fn noise_increment(&self, k: usize) -> Mat<T> {
        self.noise_path[k + 1].minus(&self.noise_path[k])
    }

    /// `L^{-β} trend_k`, the denoised layer.
    pub fn denoised(&self, k: usize) -> Mat<T> {
        self.trend[k].scaled(T::lit((self.depth() as f64).powf(-self.beta)))
    }

    /// `L^{-β} trend_k + noise increment`, which reproduces the input.
    pub fn reconstruct(&self) -> Vec<Mat<T>> {
        (0..self.depth())
            .map(|k| self.denoised(k).plus(&self.noise_increment(k)))
            .collect()
    }
}

/// Trend/noise decomposition of `w`.
///
/// The trend is the centered moving average of the layers themselves,
/// rescaled by `L^β`. This equals differencing a moving average of the
/// partial sums `S_k` away from the ends, and near the ends (where windows
/// are clipped) it avoids the one-sided slope bias that differencing a
/// clipped average of `S` would add. The noise increments are whatever the
/// trend leaves over, so the split is an exact partition of the data.
pub fn decompose<T: Scalar>(
    w: &WeightTensor<T>,
    beta: f64,
    window: usize,
) -> Result<Decomposition<T>, DiagnosticsError> {
    let l = w.depth();
    if window == 0 || window > l || window.is_multiple_of(2) {
        return Err(DiagnosticsError::InvalidWindow { window, depth: l });
    }
    let lf = l as f64;
    let up = T::lit(lf.powf(beta));
    let down = T::lit(lf.powf(-beta));
    let smoothed = smooth_series(w.entries(), window)?;

    let mut trend = Vec::with_capacity(l);
    let mut noise_path = Vec::with_capacity(l + 1);
    let zero = w.entries()[0].zeros_like();
    noise_path.push(zero.clone());
    let mut partial = zero;
    let (mut sup_noise, mut sup_partial) = (0.0f64, 0.0f64);
    for (wk, sk) in w.entries().iter().zip(&smoothed) {
        let tk = sk.scaled(up);
        let inc = wk.minus(&tk.scaled(down));
        let next = noise_path.last().expect("non-empty").plus(&inc);
        partial.axpy(T::one(), wk);
        sup_noise = sup_noise.max(next.norm().as_f64());
        sup_partial = sup_partial.max(partial.norm().as_f64());
        trend.push(tk);
        noise_path.push(next);
    }
    let noise_fraction = if sup_noise == 0.0 {
        0.0
    } else if sup_partial == 0.0 {
        f64::INFINITY
    } else {
        sup_noise / sup_partial
    };
    Ok(Decomposition {
        trend,
        noise_path,
        beta,
        window,
        noise_fraction,
    })
}

/// Hilbert–Schmidt norm of `Σ_k vec(ΔW_k) vec(ΔW_k)^T` over a sampled path.
pub fn quadratic_variation<T: Scalar>(noise_path: &[Mat<T>]) -> Result<f64, DiagnosticsError> {
    if noise_path.len() < 2 {
        return Err(DiagnosticsError::TooShallow {
            depth: noise_path.len(),
            needed: 2,
        });
    }
    let incs: Vec<Vec<f64>> = noise_path
        .windows(2)
        .map(|p| {
            p[1].minus(&p[0])
                .as_slice()
                .iter()
                .map(|v| v.as_f64())
                .collect()
        })
        .collect();
    let n = incs.len();
    let dim = incs[0].len();
    // |Σ v v^T|_HS^2 = Σ_{j,l} (v_j . v_l)^2; pick the cheaper side
    let hs_sq = if n <= dim {
        let mut acc = 0.0;
        for j in 0..n {
            for l in 0..n {
                let dot: f64 = incs[j].iter().zip(&incs[l]).map(|(a, b)| a * b).sum();
                acc += dot * dot;
            }
        }
        acc
    } else {
        let mut m = vec![0.0f64; dim * dim];
        for v in &incs {
            for (r, &vr) in v.iter().enumerate() {
                if vr == 0.0 {
                    continue;
                }
                let row = &mut m[r * dim..(r + 1) * dim];
                for (c, &vc) in v.iter().enumerate() {
                    row[c] += vr * vc;
                }
            }
        }
        m.iter().map(|x| x * x).sum()
    };
    Ok(hs_sq.sqrt())
}
