//! Datasets: the partitioned unit sphere, CIFAR-10 binaries, PCA and mini-batching.

mod cifar;
mod pca;
mod sphere;

pub use cifar::{load_cifar10, parse_cifar_batch, CIFAR_IMAGE_BYTES, CIFAR_RECORDS_PER_FILE};
pub use pca::{fit_pca, pca_inverse, pca_transform, PcaModel};
pub use sphere::{
    generate_sphere_dataset, partition_index, read_sphere_csv, write_sphere_csv,
    SpherePartitionSpec,
};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OvrError, Result};

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Sphere(SpherePartitionSpec),
    Cifar10 {
        path: String,
        split: String,
        pca_dims: Option<usize>,
    },
    Derived(String),
}

/// Sample matrix (one row per sample) with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub class_count: usize,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(
        x: Array2<f64>,
        y: Vec<usize>,
        class_count: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(OvrError::InvalidArgument("dataset has no samples".into()));
        }
        if class_count == 0 {
            return Err(OvrError::InvalidArgument("class_count must be positive".into()));
        }
        if x.nrows() != y.len() {
            return Err(OvrError::Shape(format!(
                "{} samples but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(&label) = y.iter().find(|&&l| l >= class_count) {
            return Err(OvrError::InvalidLabel { label, class_count });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OvrError::Numeric("dataset samples".into()));
        }
        Ok(Self {
            x,
            y,
            class_count,
            provenance,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(OvrError::InvalidArgument("empty subset".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.num_samples()) {
            return Err(OvrError::InvalidArgument(format!(
                "row {bad} out of range for {} samples",
                self.num_samples()
            )));
        }
        Ok(Self {
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            class_count: self.class_count,
            provenance: self.provenance.clone(),
        })
    }

    /// Same labels, new features (e.g. learned representations).
    pub fn with_features(&self, x: Array2<f64>, note: &str) -> Result<Self> {
        Self::new(
            x,
            self.y.clone(),
            self.class_count,
            Provenance::Derived(note.to_string()),
        )
    }

    /// Seeded shuffle split into (train, validation).
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(OvrError::InvalidArgument(format!(
                "val_fraction {val_fraction} not in (0, 1)"
            )));
        }
        let n = self.num_samples();
        let n_val = ((n as f64) * val_fraction).round() as usize;
        if n_val == 0 || n_val >= n {
            return Err(OvrError::InvalidArgument(format!(
                "split of {n} samples at {val_fraction} leaves an empty side"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (val_idx, train_idx) = order.split_at(n_val);
        Ok((self.subset(train_idx)?, self.subset(val_idx)?))
    }
}

/// One mini-batch with the source rows it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Array2<f64>,
    pub y: Option<Vec<usize>>,
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Permutation of row indices for `(seed, epoch)`, chunked into batches.
/// The last chunk may be short.
pub fn batch_indices(
    num_samples: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(OvrError::InvalidArgument("batch_size must be at least 1".into()));
    }
    if batch_size > num_samples {
        return Err(OvrError::InvalidArgument(format!(
            "batch_size {batch_size} exceeds {num_samples} samples"
        )));
    }
    let mut order: Vec<usize> = (0..num_samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ epoch));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Seeded shuffled mini-batches covering every row exactly once.
pub fn make_batches(
    dataset: &LabeledDataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Batch>> {
    Ok(
        batch_indices(dataset.num_samples(), batch_size, seed, epoch)?
            .into_iter()
            .map(|indices| Batch {
                x: dataset.x.select(Axis(0), &indices),
                y: Some(indices.iter().map(|&i| dataset.y[i]).collect()),
                indices,
            })
            .collect(),
    )
}
