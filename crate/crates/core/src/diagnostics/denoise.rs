use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::diagnostics::decompose::Decomposition;
use crate::diagnostics::tensor::TensorKind;
use crate::diagnostics::DiagnosticsError;
use crate::numerics::tensor::{Tensor, Vector};
use crate::resnet::{Delta, ResNet};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoisedLoss {
    pub original: f64,
    pub denoised: f64,
}

impl DenoisedLoss {
    pub fn ratio(&self) -> f64 {
        self.denoised / self.original
    }
}

/// Rebuilds `net` from trends only, `Ã_k = L^{-β} trend_k` and likewise for
/// `b`, keeping δ.
///
/// When the decompositions were taken of total-scaling tensors
/// (`|δ_k| A_k`), the trends already carry `|δ_k|`, so the rebuilt network
/// uses `sign(δ_k)` in place of δ. For ReLU this is the same map by
/// positive homogeneity.
pub fn denoise_network<T: Scalar>(
    net: &ResNet<T>,
    weights: &Decomposition<T>,
    biases: &Decomposition<T>,
    kind: TensorKind,
) -> Result<ResNet<T>, DiagnosticsError> {
    let (l, d) = (net.depth(), net.width());
    let shapes_ok = weights.depth() == l
        && biases.depth() == l
        && weights.trend.iter().all(|m| m.shape() == (d, d))
        && biases.trend.iter().all(|m| m.shape() == (d, 1));
    if !shapes_ok {
        return Err(DiagnosticsError::ShapeMismatch(format!(
            "decompositions do not match a depth-{l}, width-{d} network"
        )));
    }
    let a = (0..l).map(|k| weights.denoised(k)).collect();
    let b = (0..l)
        .map(|k| Vector::from_vec_unchecked(biases.denoised(k).as_slice().to_vec()))
        .collect();
    let delta = match kind {
        TensorKind::TotalScaling => match &net.delta {
            Delta::Shared(v) => Delta::Shared(sign(*v)),
            Delta::PerLayer(v) => Delta::PerLayer(v.iter().map(|&x| sign(x)).collect()),
        },
        _ => net.delta.clone(),
    };
    ResNet::from_parts(net.arch, a, b, delta)
        .map_err(|e| DiagnosticsError::ShapeMismatch(e.to_string()))
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Training-set loss of `net` and of its denoised rebuild.
pub fn denoised_loss<T: Scalar>(
    net: &ResNet<T>,
    weights: &Decomposition<T>,
    biases: &Decomposition<T>,
    kind: TensorKind,
    data: &Dataset<T>,
) -> Result<DenoisedLoss, DiagnosticsError> {
    if data.d() != net.width() {
        return Err(DiagnosticsError::ShapeMismatch(format!(
            "dataset dimension {} vs network width {}",
            data.d(),
            net.width()
        )));
    }
    let denoised = denoise_network(net, weights, biases, kind)?;
    let original = net.loss(data.iter())?.as_f64();
    let denoised = denoised.loss(data.iter())?.as_f64();
    Ok(DenoisedLoss { original, denoised })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_synthetic;
    use crate::diagnostics::decompose::decompose;
    use crate::diagnostics::tensor::{total_scaling, WeightTensor};
    use crate::resnet::Architecture;

    #[test]
    fn zero_noise_split_keeps_the_loss() {
        let data = generate_synthetic::<f64>(2, 40, 4, 100).unwrap();
        let net = ResNet::<f64>::init(Architecture::tanh_shared(12, 4), 5).unwrap();
        let da = decompose(&WeightTensor::weights_of(&net), 0.4, 1).unwrap();
        let db = decompose(&WeightTensor::biases_of(&net), 0.7, 1).unwrap();
        let r = denoised_loss(&net, &da, &db, TensorKind::Weights, &data).unwrap();
        assert!((r.original - r.denoised).abs() < 1e-12);
    }

    #[test]
    fn total_scaling_rebuild_is_the_same_relu_map() {
        let data = generate_synthetic::<f64>(2, 40, 4, 100).unwrap();
        let net = ResNet::<f64>::init(Architecture::relu_per_layer(12, 4), 5).unwrap();
        let delta = net.delta.per_layer(12);
        let wa = total_scaling(&delta, &WeightTensor::weights_of(&net)).unwrap();
        let wb = total_scaling(&delta, &WeightTensor::biases_of(&net)).unwrap();
        let da = decompose(&wa, 0.5, 1).unwrap();
        let db = decompose(&wb, 0.5, 1).unwrap();
        let r = denoised_loss(&net, &da, &db, TensorKind::TotalScaling, &data).unwrap();
        assert!((r.original - r.denoised).abs() < 1e-12);
    }

    #[test]
    fn mismatched_shapes_fail() {
        let data = generate_synthetic::<f64>(2, 8, 4, 100).unwrap();
        let net = ResNet::<f64>::init(Architecture::tanh_shared(6, 4), 5).unwrap();
        let other = ResNet::<f64>::init(Architecture::tanh_shared(5, 4), 5).unwrap();
        let da = decompose(&WeightTensor::weights_of(&other), 0.4, 1).unwrap();
        let db = decompose(&WeightTensor::biases_of(&net), 0.4, 1).unwrap();
        assert!(denoised_loss(&net, &da, &db, TensorKind::Weights, &data).is_err());
    }
}
