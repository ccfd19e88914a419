//! Generative adversarial encoder learning with Gaussian-mixture latent modeling.
//!
//! A generator is trained against a critic whose trunk also feeds an encoder
//! head that learns to recover the latent code of generated samples. After
//! training, real data is encoded, a Gaussian mixture is fitted to the codes,
//! and the mixture replaces the standard normal as the generator input (or
//! serves as a clustering model).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod data;
pub mod error;
pub mod gmm;
pub mod losses;
pub mod metrics;
pub mod networks;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tape = autodiff::Tape<f64>;
pub type GmmModel = gmm::GmmModel<f64>;
pub type GmmModel32 = gmm::GmmModel<f32>;
pub type GeneratorNet = networks::GeneratorNet<f64>;
pub type GeneratorNet32 = networks::GeneratorNet<f32>;
pub type JointCriticNet = networks::JointCriticNet<f64>;
pub type JointCriticNet32 = networks::JointCriticNet<f32>;
pub type LabeledDataset = data::LabeledDataset<f64>;
pub type Trainer = trainer::Trainer<f64>;
pub type Trainer32 = trainer::Trainer<f32>;

pub use trainer::{Checkpoint, TrainConfig};
