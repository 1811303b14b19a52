//! Rectified correlations on a sphere: a small CNN toolkit built around the
//! anchor-vector view of convolution layers.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). Experiments
//! and checkpoints use `f64`; the aliases at the bottom of this file name the
//! concrete instantiations.

pub mod cascade;
pub mod container;
pub mod data;
pub mod error;
pub mod layers;
pub mod lenet;
pub mod numerics;
pub mod recos;

pub use error::{Error, Result};
pub use numerics::{Rng, Scalar, Tensor};
pub use recos::{Activation, AnchorSet, InputVector};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type AnchorSet64 = AnchorSet<f64>;
pub type Network64 = lenet::Network<f64>;
pub type Network32 = lenet::Network<f32>;
pub type Dataset64 = data::LabeledDataset<f64>;
