use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsError;
use crate::numerics::tensor::{Mat, Tensor, Vector};
use crate::resnet::ResNet;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Weights,
    Biases,
    /// `|δ_k| A_k` or `|δ_k| b_k`.
    TotalScaling,
}

/// A depth-indexed stack `w_0, ..., w_{L-1}` of equally shaped layers.
///
/// Bias vectors are stored as `d x 1` matrices, so every norm below is the
/// Frobenius norm of the layer.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor<T> {
    kind: TensorKind,
    entries: Vec<Mat<T>>,
}

impl<T: Scalar> WeightTensor<T> {
    pub fn new(kind: TensorKind, entries: Vec<Mat<T>>) -> Result<Self, DiagnosticsError> {
        let Some(first) = entries.first() else {
            return Err(DiagnosticsError::Empty);
        };
        let shape = first.shape();
        if let Some(k) = entries.iter().position(|m| m.shape() != shape) {
            return Err(DiagnosticsError::ShapeMismatch(format!(
                "layer {k} has shape {:?}, layer 0 has {shape:?}",
                entries[k].shape()
            )));
        }
        Ok(Self { kind, entries })
    }

    pub fn from_vectors(kind: TensorKind, vs: &[Vector<T>]) -> Result<Self, DiagnosticsError> {
        Self::new(kind, vs.iter().map(Mat::column).collect())
    }

    pub fn weights_of(net: &ResNet<T>) -> Self {
        Self {
            kind: TensorKind::Weights,
            entries: net.a.clone(),
        }
    }

    pub fn biases_of(net: &ResNet<T>) -> Self {
        Self {
            kind: TensorKind::Biases,
            entries: net.b.iter().map(Mat::column).collect(),
        }
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    /// Depth `L`.
    pub fn depth(&self) -> usize {
        self.entries.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries[0].shape()
    }

    pub fn entries(&self) -> &[Mat<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Mat<T>> {
        self.entries
    }

    /// Layers as vectors (for bias tensors).
    pub fn to_vectors(&self) -> Vec<Vector<T>> {
        self.entries
            .iter()
            .map(|m| Vector::from_vec_unchecked(m.as_slice().to_vec()))
            .collect()
    }
}

/// `|δ_k| w_k` for every layer. For ReLU networks this is the effective
/// layer weight, since `δ σ(A h + b) = sign(δ) σ(|δ| A h + |δ| b)`.
pub fn total_scaling<T: Scalar>(
    delta: &[T],
    w: &WeightTensor<T>,
) -> Result<WeightTensor<T>, DiagnosticsError> {
    if delta.len() != w.depth() {
        return Err(DiagnosticsError::LengthMismatch {
            expected: w.depth(),
            got: delta.len(),
        });
    }
    let entries = w
        .entries
        .iter()
        .zip(delta)
        .map(|(m, d)| m.scaled(d.abs()))
        .collect();
    Ok(WeightTensor {
        kind: TensorKind::TotalScaling,
        entries,
    })
}
