//! Plain minibatch SGD with early stopping.

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::numerics::rng::RngStream;
use crate::resnet::arch::{Activation, DeltaMode};
use crate::resnet::network::{Delta, ResNet};
use crate::resnet::ResNetError;
use crate::scalar::Scalar;

const STREAM_SHUFFLE: u64 = 0x5348_5546;

/// Loss convention recorded alongside every history.
pub const LOSS_CONVENTION: &str = "mean over batch of mean over coordinates of squared error";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Stop once a minibatch loss falls below this value.
    pub early_stop: f64,
    pub max_updates: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Synthetic-data hyperparameters: `N = 1024`, `B = 32`, `η = 0.01`,
    /// `ε = 0.01`, `T_max = ceil(N/B) * 5 = 160`.
    pub fn synthetic_defaults(seed: u64) -> Self {
        Self {
            batch_size: 32,
            learning_rate: 0.01,
            early_stop: 0.01,
            max_updates: 160,
            seed,
        }
    }

    /// MNIST hyperparameters: `B = 50`, `η = 0.01`, `ε = 0.01`, `T_max = 12000`.
    pub fn mnist_defaults(seed: u64) -> Self {
        Self {
            batch_size: 50,
            learning_rate: 0.01,
            early_stop: 0.01,
            max_updates: 12_000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ResNetError> {
        if self.batch_size == 0
            || !(self.learning_rate >= 0.0 && self.learning_rate.is_finite())
            || self.early_stop.is_nan()
            || self.early_stop < 0.0
            || self.max_updates == 0
        {
            return Err(ResNetError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Minibatch loss at each update, measured before the step.
    pub losses: Vec<f64>,
    pub final_loss: f64,
    pub updates: usize,
    pub converged: bool,
    /// Largest `|h_k|` seen in any forward pass during training.
    pub max_hidden_norm: f64,
    pub loss_convention: String,
}

/// Trains `net` by SGD. Minibatches come from a Fisher–Yates shuffle of the
/// dataset drawn from a per-epoch stream; the trailing partial batch of an
/// epoch is used as is. Shared-δ tanh networks keep `δ >= 0` by clamping
/// after each step.
pub fn sgd_train<T: Scalar>(
    mut net: ResNet<T>,
    data: &Dataset<T>,
    config: &TrainConfig,
) -> Result<(ResNet<T>, TrainHistory), ResNetError> {
    config.validate()?;
    if data.d() != net.width() {
        return Err(ResNetError::DimensionMismatch(format!(
            "dataset dimension {} vs network width {}",
            data.d(),
            net.width()
        )));
    }
    let lr = T::lit(config.learning_rate);
    let clamp_delta =
        net.arch.activation == Activation::Tanh && net.arch.delta_mode == DeltaMode::Shared;
    let mut losses = Vec::new();
    let mut max_hidden = 0.0f64;
    let mut converged = false;
    let mut order: Vec<usize> = (0..data.n()).collect();
    let mut epoch = 0u64;

    'outer: loop {
        RngStream::derived(config.seed, &[STREAM_SHUFFLE, epoch]).shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let grads = net.backward(chunk.iter().map(|&i| data.sample(i)))?;
            let loss = grads.loss.as_f64();
            if !loss.is_finite() {
                return Err(ResNetError::Diverged {
                    update: losses.len() + 1,
                });
            }
            max_hidden = max_hidden.max(grads.max_hidden_norm.as_f64());
            net.apply_update(&grads, lr);
            if clamp_delta {
                if let Delta::Shared(d) = &mut net.delta {
                    *d = d.max(T::zero());
                }
            }
            losses.push(loss);
            if loss < config.early_stop {
                converged = true;
                break 'outer;
            }
            if losses.len() >= config.max_updates {
                break 'outer;
            }
        }
        epoch += 1;
    }
    let final_loss = *losses.last().expect("at least one update");
    let history = TrainHistory {
        updates: losses.len(),
        final_loss,
        losses,
        converged,
        max_hidden_norm: max_hidden,
        loss_convention: LOSS_CONVENTION.to_string(),
    };
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_synthetic;
    use crate::resnet::arch::Architecture;

    fn small_data() -> Dataset<f64> {
        generate_synthetic(1, 64, 10, 100).unwrap()
    }

    #[test]
    fn huge_early_stop_returns_after_one_update() {
        let data = small_data();
        let net = ResNet::init(Architecture::tanh_shared(4, 10), 3).unwrap();
        let cfg = TrainConfig {
            early_stop: 1e9,
            ..TrainConfig::synthetic_defaults(0)
        };
        let (_, hist) = sgd_train(net, &data, &cfg).unwrap();
        assert_eq!(hist.updates, 1);
        assert!(hist.converged);
        assert!(hist.final_loss < cfg.early_stop);
    }

    #[test]
    fn zero_early_stop_runs_to_the_budget() {
        let data = small_data();
        let net = ResNet::init(Architecture::relu_per_layer(3, 10), 3).unwrap();
        let cfg = TrainConfig {
            early_stop: 0.0,
            max_updates: 7,
            ..TrainConfig::synthetic_defaults(0)
        };
        let (_, hist) = sgd_train(net, &data, &cfg).unwrap();
        assert_eq!(hist.updates, 7);
        assert!(!hist.converged);
        assert!(hist.losses.iter().all(|&l| l >= 0.0));
        assert!(hist.max_hidden_norm.is_finite() && hist.max_hidden_norm > 0.0);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let data = small_data();
        let net = ResNet::init(Architecture::tanh_shared(3, 10), 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            early_stop: 0.0,
            max_updates: 5,
            ..TrainConfig::synthetic_defaults(0)
        };
        let (trained, hist) = sgd_train(net.clone(), &data, &cfg).unwrap();
        assert_eq!(hist.updates, 5);
        assert_eq!(trained, net);
    }

    #[test]
    fn invalid_configs_and_shapes() {
        let data = small_data();
        let net = ResNet::init(Architecture::tanh_shared(3, 4), 3).unwrap();
        assert!(matches!(
            sgd_train(net.clone(), &data, &TrainConfig::synthetic_defaults(0)),
            Err(ResNetError::DimensionMismatch(_))
        ));
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::synthetic_defaults(0)
        };
        assert!(matches!(
            sgd_train(net, &data, &bad),
            Err(ResNetError::InvalidConfig(_))
        ));
    }

    #[test]
    fn shared_tanh_delta_stays_nonnegative() {
        let data = small_data();
        let mut net = ResNet::init(Architecture::tanh_shared(3, 10), 3).unwrap();
        net.delta = Delta::Shared(0.0);
        let cfg = TrainConfig {
            learning_rate: 5.0,
            early_stop: 0.0,
            max_updates: 20,
            ..TrainConfig::synthetic_defaults(2)
        };
        let (trained, _) = sgd_train(net, &data, &cfg).unwrap();
        assert!(trained.delta.at(0) >= 0.0);
    }
}
