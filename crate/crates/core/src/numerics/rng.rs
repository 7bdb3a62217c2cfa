//! Reproducible random streams.
//!
//! A stream is identified by `(master_seed, stream_index)`. The ChaCha8 key
//! is expanded from `master_seed` (via `SeedableRng::seed_from_u64`) and the
//! stream index is used as the ChaCha nonce, so distinct indices under one
//! seed are independent keystreams. Nested work (depth, seed, path, epoch)
//! builds its index with [`stream_id`].
//!
//! Normal deviates use the Marsaglia polar method on 53-bit uniforms, with the
//! second deviate of each accepted pair cached for the next call.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::tensor::{Mat, Vector};
use crate::scalar::Scalar;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of tags (e.g. `[TAG_TRAIN, depth, seed, epoch]`) into one
/// stream index.
pub fn stream_id(tags: &[u64]) -> u64 {
    tags.iter()
        .fold(0x5EED_u64, |acc, &t| mix64(acc ^ mix64(t)))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    core: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(master_seed);
        core.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            core,
            spare_normal: None,
        }
    }

    /// Stream addressed by a tag path under `master_seed`.
    pub fn derived(master_seed: u64, tags: &[u64]) -> Self {
        Self::new(master_seed, stream_id(tags))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn normal<T: Scalar>(&mut self, std: T) -> T {
        T::lit(self.standard_normal()) * std
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<E>(&mut self, items: &mut [E]) {
        items.shuffle(&mut self.core);
    }
}

/// Matrix with i.i.d. `N(0, std^2)` entries, filled row-major.
pub fn gaussian_matrix<T: Scalar>(rng: &mut RngStream, rows: usize, cols: usize, std: T) -> Mat<T> {
    Mat::from_fn(rows, cols, |_, _| rng.normal(std))
}

pub fn gaussian_vector<T: Scalar>(rng: &mut RngStream, dim: usize, std: T) -> Vector<T> {
    Vector::from_fn(dim, |_| rng.normal(std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor;

    #[test]
    fn zero_std_gives_zero_matrix() {
        let mut rng = RngStream::new(1, 2);
        let m = gaussian_matrix(&mut rng, 4, 3, 0.0f64);
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_streams_are_bit_identical() {
        let a = gaussian_matrix(&mut RngStream::new(42, 7), 5, 5, 1.0f64);
        let b = gaussian_matrix(&mut RngStream::new(42, 7), 5, 5, 1.0f64);
        assert_eq!(a.as_slice(), b.as_slice());
        let c = gaussian_matrix(&mut RngStream::new(42, 8), 5, 5, 1.0f64);
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn gaussian_moments_over_a_million_draws() {
        let m = gaussian_matrix(&mut RngStream::new(2024, 0), 1000, 1000, 1.0f64);
        let n = m.len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m
            .as_slice()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn sibling_streams_are_uncorrelated() {
        let n = 200_000;
        let mut a = RngStream::new(5, 0);
        let mut b = RngStream::new(5, 1);
        let corr: f64 = (0..n)
            .map(|_| a.standard_normal() * b.standard_normal())
            .sum::<f64>()
            / n as f64;
        // 5 standard errors of a sample correlation of independent normals
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn stream_ids_depend_on_every_tag() {
        assert_ne!(stream_id(&[1, 2, 3]), stream_id(&[1, 2, 4]));
        assert_ne!(stream_id(&[1, 2]), stream_id(&[2, 1]));
        assert_eq!(stream_id(&[9, 9]), stream_id(&[9, 9]));
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut r = RngStream::new(0, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
