//! Sparse representation learning with the one-vs-rest (OVR) overlap penalty.
//!
//! The crate is organised bottom-up:
//!
//! - [`datasets`]: the partitioned-sphere toy manifold, CIFAR-10 binary ingestion,
//!   PCA reduction and seeded mini-batching.
//! - [`network`]: dense layers, losses, backpropagation, Adam, plateau scheduling,
//!   input corruption, single-hidden-layer MLPs/autoencoders and checkpoints.
//! - [`regularizers`]: the OVR overlap penalty, the activity anchor, L1/L2 activity
//!   penalties and row normalisation, each with analytic gradients.
//! - [`ovr_encoder`]: the backprop-free single-layer encoder trained on the
//!   anchored OVR cost.
//! - [`evaluation`]: sparsity/overlap metrics, the logistic probe and online k-means.

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod ovr_encoder;
pub mod regularizers;

#[cfg(test)]
mod testutil;

pub use error::{OvrError, Result};

/// Library version embedded into experiment records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
