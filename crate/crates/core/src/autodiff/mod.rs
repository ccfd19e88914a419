//! Reverse-mode automatic differentiation over dense real tensors.
//!
//! A [`Tape`] records each primitive as it is evaluated; [`Tape::backward`]
//! sweeps it once in reverse to produce gradients for every tracked leaf.
//! Multiple uses of a value sum their gradient contributions.

mod adam;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use tape::{Gradients, OpKind, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
