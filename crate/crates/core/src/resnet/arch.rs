use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::resnet::ResNetError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            _ => Err(format!("unknown activation `{s}` (expected tanh or relu)")),
        }
    }
}

/// Whether the residual scale δ is one trainable scalar or one per layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Shared,
    PerLayer,
}

impl DeltaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DeltaMode::Shared => "shared",
            DeltaMode::PerLayer => "per_layer",
        }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeltaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shared" => Ok(DeltaMode::Shared),
            "per_layer" => Ok(DeltaMode::PerLayer),
            _ => Err(format!(
                "unknown delta mode `{s}` (expected shared or per_layer)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub delta_mode: DeltaMode,
}

impl Architecture {
    pub fn new(
        depth: usize,
        width: usize,
        activation: Activation,
        delta_mode: DeltaMode,
    ) -> Result<Self, ResNetError> {
        let arch = Self {
            depth,
            width,
            activation,
            delta_mode,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// tanh with a shared scale.
    pub fn tanh_shared(depth: usize, width: usize) -> Self {
        Self {
            depth,
            width,
            activation: Activation::Tanh,
            delta_mode: DeltaMode::Shared,
        }
    }

    /// ReLU with per-layer scales.
    pub fn relu_per_layer(depth: usize, width: usize) -> Self {
        Self {
            depth,
            width,
            activation: Activation::Relu,
            delta_mode: DeltaMode::PerLayer,
        }
    }

    pub fn validate(&self) -> Result<(), ResNetError> {
        if self.depth == 0 || self.width == 0 {
            return Err(ResNetError::InvalidArchitecture(format!(
                "depth and width must be >= 1 (got L={}, d={})",
                self.depth, self.width
            )));
        }
        Ok(())
    }

    /// The two studied setups are tanh/shared and ReLU/per-layer; other
    /// pairings run but are flagged.
    pub fn is_canonical(&self) -> bool {
        matches!(
            (self.activation, self.delta_mode),
            (Activation::Tanh, DeltaMode::Shared) | (Activation::Relu, DeltaMode::PerLayer)
        )
    }

    /// Parameters stored: `L d^2 + L d + (1 or L)`.
    pub fn param_count(&self) -> usize {
        let delta = match self.delta_mode {
            DeltaMode::Shared => 1,
            DeltaMode::PerLayer => self.depth,
        };
        self.depth * self.width * self.width + self.depth * self.width + delta
    }
}
