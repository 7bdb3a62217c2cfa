//! Low-dimensional MNIST embedding through a fixed random convolutional
//! projection.
//!
//! Pixels are scaled to `[0, 1]`, then two untrained bias-free convolutions
//! (3x3 kernels, stride 2, no padding) map `1x28x28 -> 4x13x13 -> 1x6x6`.
//! The 36 outputs are flattened row-major and the first `d` kept. Kernel
//! entries are `N(0, 1/9)` drawn from the dataset seed.

use crate::datasets::idx::IdxArray;
use crate::datasets::{DataError, Dataset, DatasetKind, Provenance};
use crate::numerics::rng::{stream_id, RngStream};
use crate::numerics::tensor::Vector;
use crate::scalar::Scalar;

const STREAM_MNIST_KERNELS: u64 = 0x4d4e_4953;
pub const IMAGE_SIDE: usize = 28;
pub const NUM_CLASSES: usize = 10;
pub const MNIST_DIM: usize = 25;

const KERNEL: usize = 3;
const STRIDE: usize = 2;
const MID_CHANNELS: usize = 4;
const KERNEL_STD: f64 = 1.0 / 3.0;

fn out_side(side: usize) -> usize {
    (side - KERNEL) / STRIDE + 1
}

/// Largest embedding dimension the projection can produce.
pub fn max_embedding_dim() -> usize {
    let s = out_side(out_side(IMAGE_SIDE));
    s * s
}

/// Random projection kernels; `layer1[c]` is channel `c`'s 3x3 kernel and
/// `layer2[c]` maps input channel `c` to the single output channel.
#[derive(Clone, Debug)]
pub struct ConvProjection<T> {
    layer1: Vec<[T; KERNEL * KERNEL]>,
    layer2: Vec<[T; KERNEL * KERNEL]>,
}

impl<T: Scalar> ConvProjection<T> {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = RngStream::new(seed, stream_id(&[STREAM_MNIST_KERNELS]));
        let std = T::lit(KERNEL_STD);
        let draw = |rng: &mut RngStream| -> [T; KERNEL * KERNEL] {
            std::array::from_fn(|_| rng.normal(std))
        };
        let layer1 = (0..MID_CHANNELS).map(|_| draw(&mut rng)).collect();
        let layer2 = (0..MID_CHANNELS).map(|_| draw(&mut rng)).collect();
        Self { layer1, layer2 }
    }

    /// Flattened `6x6` output for one image given as `[0,1]` pixels.
    pub fn project(&self, pixels: &[T]) -> Vec<T> {
        let s1 = out_side(IMAGE_SIDE);
        let s2 = out_side(s1);
        let mid: Vec<Vec<T>> = self
            .layer1
            .iter()
            .map(|k| conv_valid(pixels, IMAGE_SIDE, k))
            .collect();
        let mut out = vec![T::zero(); s2 * s2];
        for (channel, k) in mid.iter().zip(&self.layer2) {
            for (o, v) in out.iter_mut().zip(conv_valid(channel, s1, k)) {
                *o = *o + v;
            }
        }
        out
    }
}

fn conv_valid<T: Scalar>(input: &[T], side: usize, kernel: &[T; KERNEL * KERNEL]) -> Vec<T> {
    let s = out_side(side);
    let mut out = Vec::with_capacity(s * s);
    for oy in 0..s {
        for ox in 0..s {
            let mut acc = T::zero();
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let (y, x) = (oy * STRIDE + ky, ox * STRIDE + kx);
                    acc = acc + kernel[ky * KERNEL + kx] * input[y * side + x];
                }
            }
            out.push(acc);
        }
    }
    out
}

pub fn one_hot<T: Scalar>(class: usize, d: usize) -> Vector<T> {
    Vector::from_fn(d, |i| if i == class { T::one() } else { T::zero() })
}

pub fn embed_mnist<T: Scalar>(
    images: &IdxArray,
    labels: &IdxArray,
    seed: u64,
    d: usize,
) -> Result<Dataset<T>, DataError> {
    if images.dims.len() != 3 || images.dims[1] != IMAGE_SIDE || images.dims[2] != IMAGE_SIDE {
        return Err(DataError::DimensionMismatch(format!(
            "images must be Nx28x28, got {:?}",
            images.dims
        )));
    }
    if labels.dims.len() != 1 || labels.count() != images.count() {
        return Err(DataError::DimensionMismatch(format!(
            "{} images but labels have dims {:?}",
            images.count(),
            labels.dims
        )));
    }
    if d < NUM_CLASSES || d > max_embedding_dim() {
        return Err(DataError::InvalidParameter(format!(
            "embedding dimension must be in {NUM_CLASSES}..={}, got {d}",
            max_embedding_dim()
        )));
    }
    let projection = ConvProjection::<T>::from_seed(seed);
    let scale = T::lit(1.0 / 255.0);
    let mut inputs = Vec::with_capacity(images.count());
    let mut targets = Vec::with_capacity(images.count());
    for i in 0..images.count() {
        let class = labels.data[i] as usize;
        if class >= NUM_CLASSES {
            return Err(DataError::InvalidParameter(format!(
                "label {class} at index {i}"
            )));
        }
        let pixels: Vec<T> = images
            .item(i)
            .iter()
            .map(|&p| T::from_u8(p).expect("byte") * scale)
            .collect();
        let mut flat = projection.project(&pixels);
        flat.truncate(d);
        inputs.push(Vector::from_vec_unchecked(flat));
        targets.push(one_hot(class, d));
    }
    Dataset::new(
        inputs,
        targets,
        Provenance {
            kind: DatasetKind::Mnist,
            seed,
            params: vec![
                ("n".into(), images.count().to_string()),
                ("d".into(), d.to_string()),
            ],
        },
    )
}
