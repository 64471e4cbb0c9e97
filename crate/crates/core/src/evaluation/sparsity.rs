use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{ensure_shape, OvrError, Result};
use crate::network::Activation;

/// Threshold at or below which a unit counts as inactive.
pub fn default_tau(activation: Activation) -> f64 {
    match activation {
        Activation::Sigmoid => 0.05,
        Activation::Relu | Activation::Identity => 1e-6,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub mean_sparsity: f64,
    pub per_sample_sparsity: Array1<f64>,
    pub tau: f64,
    pub mean_activation: f64,
}

/// Fraction of units with activation `<= tau`, per sample and averaged.
pub fn sparsity(h: &Array2<f64>, tau: f64) -> Result<SparsityReport> {
    if h.is_empty() {
        return Err(OvrError::InvalidArgument("sparsity of an empty batch".into()));
    }
    if !(tau >= 0.0) {
        return Err(OvrError::InvalidArgument(format!("tau {tau} must be >= 0")));
    }
    let units = h.ncols() as f64;
    let per_sample_sparsity =
        h.map_axis(ndarray::Axis(1), |r| r.iter().filter(|&&v| v <= tau).count() as f64 / units);
    Ok(SparsityReport {
        mean_sparsity: per_sample_sparsity.mean().expect("nonempty"),
        per_sample_sparsity,
        tau,
        mean_activation: h.mean().expect("nonempty"),
    })
}

/// Sorted indices of units active above `tau`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
}

impl ActiveSet {
    pub fn from_activations(h: ArrayView1<'_, f64>, tau: f64) -> Self {
        Self {
            indices: h
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > tau)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn intersection_len(&self, other: &ActiveSet) -> usize {
        let (mut a, mut b) = (self.indices.iter().peekable(), other.indices.iter().peekable());
        let mut count = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    count += 1;
                    a.next();
                    b.next();
                }
            }
        }
        count
    }
}

pub fn active_set_overlap(
    h_a: ArrayView1<'_, f64>,
    h_b: ArrayView1<'_, f64>,
    tau: f64,
) -> Result<(ActiveSet, ActiveSet, usize)> {
    ensure_shape(h_a.len() == h_b.len(), || {
        format!("representations of length {} and {}", h_a.len(), h_b.len())
    })?;
    let s_a = ActiveSet::from_activations(h_a, tau);
    let s_b = ActiveSet::from_activations(h_b, tau);
    let overlap = s_a.intersection_len(&s_b);
    Ok((s_a, s_b, overlap))
}
