//! Representation metrics and the downstream baselines: sparsity, active-set
//! overlap, the logistic probe and online k-means.

mod kmeans;
mod probe;
mod sparsity;

pub use kmeans::{kmeans_encode, kmeans_fit, KMeansEncoding, KMeansModel};
pub use probe::{train_logistic_probe, ProbeConfig, ProbeOutcome};
pub use sparsity::{active_set_overlap, default_tau, sparsity, ActiveSet, SparsityReport};
