//! Weight tensors with a known scaling regime, built by construction.
//!
//! Used to calibrate and test the diagnostics and to produce fixture
//! checkpoints. All families are `f64` and deterministic in their seed; the
//! depth-independent parts (trend coefficients) depend on the seed only, and
//! the random parts are drawn from a stream keyed by `(seed, depth)`.

use std::f64::consts::PI;

use crate::diagnostics::tensor::{TensorKind, WeightTensor};
use crate::numerics::rng::{gaussian_matrix, stream_id, RngStream};
use crate::numerics::tensor::{Mat, Tensor};

const STREAM_TREND: u64 = 0x5452_4e44;
const STREAM_NOISE: u64 = 0x4e4f_4953;
const STREAM_SPARSE: u64 = 0x5350_5253;

/// `A_k = L^{-β} f(k/L)` with `d = 1`.
pub fn h1_scalar(depth: usize, beta: f64, f: impl Fn(f64) -> f64) -> WeightTensor<f64> {
    let scale = (depth as f64).powf(-beta);
    let entries = (0..depth)
        .map(|k| Mat::from_fn(1, 1, |_, _| scale * f(k as f64 / depth as f64)))
        .collect();
    WeightTensor::new(TensorKind::Weights, entries).expect("depth >= 1")
}

/// Trend `Ā(t) = C_0 + C_1 sin(2πt + φ)` with Gaussian `C_0`, `C_1` and a
/// uniform phase, all fixed by `seed`. Over a full period the sine part sums
/// to zero on any uniform grid, so `Σ_k Ā(k/L) = L C_0`.
pub struct PlantedTrend {
    c0: Mat<f64>,
    c1: Mat<f64>,
    phase: f64,
}

impl PlantedTrend {
    pub fn new(seed: u64, d: usize) -> Self {
        let mut rng = RngStream::new(seed, stream_id(&[STREAM_TREND, d as u64]));
        let c0 = gaussian_matrix(&mut rng, d, d, 1.0);
        let c1 = gaussian_matrix(&mut rng, d, d, 1.0);
        let phase = rng.uniform_in(0.0, 2.0 * PI);
        Self { c0, c1, phase }
    }

    pub fn at(&self, t: f64) -> Mat<f64> {
        let mut m = self.c0.clone();
        m.axpy((2.0 * PI * t + self.phase).sin(), &self.c1);
        m
    }
}

fn noise_stream(seed: u64, depth: usize) -> RngStream {
    RngStream::new(seed, stream_id(&[STREAM_NOISE, depth as u64]))
}

/// Noise-free Hypothesis-1 family `A_k = L^{-β} Ā(k/L)`.
pub fn h1_family(seed: u64, depth: usize, d: usize, beta: f64) -> WeightTensor<f64> {
    h2_family(seed, depth, d, beta, 0.0)
}

/// `A_k = L^{-β} Ā(k/L) + ΔW_k` where `W` is a matrix Brownian motion with
/// entrywise variance rate `noise^2`.
pub fn h2_family(seed: u64, depth: usize, d: usize, beta: f64, noise: f64) -> WeightTensor<f64> {
    let trend = PlantedTrend::new(seed, d);
    let scale = (depth as f64).powf(-beta);
    let step_std = noise / (depth as f64).sqrt();
    let mut rng = noise_stream(seed, depth);
    let entries = (0..depth)
        .map(|k| {
            let mut m = trend.at(k as f64 / depth as f64).scaled(scale);
            if noise > 0.0 {
                m.axpy(1.0, &gaussian_matrix(&mut rng, d, d, step_std));
            }
            m
        })
        .collect();
    WeightTensor::new(TensorKind::Weights, entries).expect("depth >= 1")
}

/// Pure Brownian increments, entrywise `N(0, scale^2 / L)`: the law of an
/// i.i.d. Gaussian initialization.
pub fn brownian_family(seed: u64, depth: usize, d: usize, scale: f64) -> WeightTensor<f64> {
    let mut rng = noise_stream(seed, depth);
    let std = scale / (depth as f64).sqrt();
    let entries = (0..depth)
        .map(|_| gaussian_matrix(&mut rng, d, d, std))
        .collect();
    WeightTensor::new(TensorKind::Weights, entries).expect("depth >= 1")
}

/// All layers zero except one entry of one layer, which equals `value`.
pub fn sparse_family(seed: u64, depth: usize, d: usize, value: f64) -> WeightTensor<f64> {
    let mut rng = RngStream::new(seed, stream_id(&[STREAM_SPARSE, depth as u64]));
    let pick = |rng: &mut RngStream, n: usize| ((rng.uniform() * n as f64) as usize).min(n - 1);
    let layer = pick(&mut rng, depth);
    let (i, j) = (pick(&mut rng, d), pick(&mut rng, d));
    let mut entries = vec![Mat::zeros(d, d); depth];
    entries[layer][(i, j)] = value;
    WeightTensor::new(TensorKind::Weights, entries).expect("depth >= 1")
}
