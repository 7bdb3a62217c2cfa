//! Depth-scaling laboratory for fully-connected residual networks.
//!
//! The crate trains residual networks `h_{k+1} = h_k + δ_k σ(A_k h_k + b_k)`
//! over a sweep of depths, measures how the trained weights scale with depth
//! ([`diagnostics`]), and simulates the ODE/SDE limits the hidden-state
//! recursion converges to ([`limits`]).
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix it to `f64`, which is what the pipeline, the gradient checks and
//! the convergence measurements use.

pub mod datasets;
pub mod diagnostics;
pub mod limits;
pub mod numerics;
pub mod resnet;
pub mod scalar;

pub use scalar::Scalar;

pub type Matrix = numerics::Mat<f64>;
pub type Vector = numerics::Vector<f64>;
pub type Dataset = datasets::Dataset<f64>;
pub type ResNet = resnet::ResNet<f64>;
pub type Gradients = resnet::Gradients<f64>;

pub type WeightTensor = diagnostics::WeightTensor<f64>;
pub type Decomposition = diagnostics::Decomposition<f64>;
pub type ItoSpec = limits::ItoSpec<f64>;
pub type DrivingPath = limits::DrivingPath<f64>;
