//! Training data: the synthetic forced-dynamics regression task and a
//! convolutional embedding of MNIST.

pub mod container;
pub mod idx;
pub mod mnist;
pub mod synthetic;

use std::path::Path;

pub use container::{ArrayContainer, ContainerError};
pub use idx::{load_idx, serialize_idx, IdxArray};
pub use mnist::{embed_mnist, MNIST_DIM};
pub use synthetic::{generate_synthetic, SYNTHETIC_DIM, SYNTHETIC_STEPS};

use crate::numerics::tensor::{Tensor, Vector};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("synthetic trajectory {index} ended at the origin")]
    DegenerateTarget { index: usize },
    #[error("IDX magic {0:#010x} is not an unsigned-byte IDX header")]
    IdxBadMagic(u32),
    #[error("IDX payload truncated: expected {expected} bytes, got {got}")]
    IdxTruncated { expected: usize, got: usize },
    #[error("IDX payload has {extra} trailing bytes")]
    IdxTrailingBytes { extra: usize },
    #[error("IDX dimensions overflow")]
    IdxDimensionOverflow,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dataset cache: {0}")]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Synthetic,
    Mnist,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Synthetic => "synthetic",
            DatasetKind::Mnist => "mnist",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub kind: DatasetKind,
    pub seed: u64,
    /// Generation parameters as ordered key/value pairs.
    pub params: Vec<(String, String)>,
}

/// Paired inputs and targets, all of one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    inputs: Vec<Vector<T>>,
    targets: Vec<Vector<T>>,
    provenance: Provenance,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        inputs: Vec<Vector<T>>,
        targets: Vec<Vector<T>>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(DataError::DimensionMismatch(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let d = inputs[0].dim();
        if inputs.iter().chain(&targets).any(|v| v.dim() != d) {
            return Err(DataError::DimensionMismatch(
                "vectors of differing dimension".into(),
            ));
        }
        Ok(Self {
            inputs,
            targets,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    pub fn d(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn inputs(&self) -> &[Vector<T>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vector<T>] {
        &self.targets
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn sample(&self, i: usize) -> (&Vector<T>, &Vector<T>) {
        (&self.inputs[i], &self.targets[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector<T>, &Vector<T>)> + Clone {
        self.inputs.iter().zip(&self.targets)
    }

    /// Cache representation: provenance in the header, `inputs` and `targets`
    /// as `n x d` arrays.
    pub fn to_container(&self) -> ArrayContainer {
        let mut c = ArrayContainer::default();
        c.meta
            .insert("kind".into(), self.provenance.kind.as_str().into());
        c.meta
            .insert("seed".into(), self.provenance.seed.to_string());
        for (k, v) in &self.provenance.params {
            c.meta.insert(format!("param.{k}"), v.clone());
        }
        let flatten = |vs: &[Vector<T>]| -> Vec<f64> {
            vs.iter()
                .flat_map(|v| v.as_slice().iter().map(|x| x.as_f64()))
                .collect()
        };
        let shape = vec![self.n(), self.d()];
        c.push("inputs", shape.clone(), flatten(&self.inputs))
            .expect("consistent shape");
        c.push("targets", shape, flatten(&self.targets))
            .expect("consistent shape");
        c
    }

    pub fn from_container(c: &ArrayContainer) -> Result<Self, DataError> {
        let kind = match c.meta.get("kind").map(String::as_str) {
            Some("synthetic") => DatasetKind::Synthetic,
            Some("mnist") => DatasetKind::Mnist,
            other => {
                return Err(DataError::InvalidParameter(format!(
                    "dataset kind {other:?}"
                )))
            }
        };
        let seed = c
            .meta
            .get("seed")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DataError::InvalidParameter("missing seed".into()))?;
        let params = c
            .meta
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("param.").map(|k| (k.to_string(), v.clone())))
            .collect();
        let unflatten = |name: &str| -> Result<Vec<Vector<T>>, DataError> {
            let a = c.get(name)?;
            if a.shape.len() != 2 || a.shape[1] == 0 {
                return Err(DataError::DimensionMismatch(format!(
                    "{name} shape {:?}",
                    a.shape
                )));
            }
            Ok(a.data
                .chunks(a.shape[1])
                .map(|row| Vector::from_vec_unchecked(row.iter().map(|&x| T::lit(x)).collect()))
                .collect())
        };
        Self::new(
            unflatten("inputs")?,
            unflatten("targets")?,
            Provenance { kind, seed, params },
        )
    }

    pub fn write_cache(&self, path: &Path) -> Result<(), DataError> {
        Ok(self.to_container().write(path)?)
    }

    pub fn read_cache(path: &Path) -> Result<Self, DataError> {
        Self::from_container(&ArrayContainer::read(path)?)
    }
}
