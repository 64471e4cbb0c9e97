//! Softmax-regression probe on frozen representations.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::batch_indices;
use crate::error::{ensure_shape, OvrError, Result};
use crate::network::{
    backprop_dense, dense_forward, softmax_ce_loss_grad, Activation, AdamConfig, DenseLayer, LayerAdam,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-3,
            batch_size: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOutcome {
    /// Best validation accuracy over epochs.
    pub accuracy: f64,
    pub best_epoch: usize,
    pub train_accuracy: f64,
    pub layer: DenseLayer,
}

fn accuracy(layer: &DenseLayer, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let logits = dense_forward(layer, x)?.act;
    let hits = logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &label)| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best == label
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Trains a linear softmax classifier with Adam and returns the best
/// validation accuracy seen across epochs.
pub fn train_logistic_probe(
    reps: &Array2<f64>,
    labels: &[usize],
    val_reps: &Array2<f64>,
    val_labels: &[usize],
    class_count: usize,
    config: &ProbeConfig,
) -> Result<ProbeOutcome> {
    ensure_shape(reps.nrows() == labels.len() && val_reps.nrows() == val_labels.len(), || {
        "representation rows and labels differ in length".into()
    })?;
    ensure_shape(reps.ncols() == val_reps.ncols(), || {
        format!("train width {} vs validation width {}", reps.ncols(), val_reps.ncols())
    })?;
    if reps.nrows() == 0 || val_reps.nrows() == 0 {
        return Err(OvrError::InvalidArgument("probe needs nonempty train and validation sets".into()));
    }
    if let Some(&label) = labels.iter().chain(val_labels).find(|&&l| l >= class_count) {
        return Err(OvrError::InvalidLabel { label, class_count });
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(OvrError::InvalidArgument(format!(
            "probe training set contains a single class ({}); nothing to separate",
            labels[0]
        )));
    }
    if config.epochs == 0 || !(config.lr > 0.0) {
        return Err(OvrError::InvalidArgument("probe epochs and lr must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut layer = DenseLayer::glorot("probe", reps.ncols(), class_count, Activation::Identity, &mut rng);
    let mut adam = LayerAdam::new(&layer, AdamConfig::default());
    let batch_size = config.batch_size.clamp(1, reps.nrows());
    let mut best = (f64::NEG_INFINITY, 0, layer.clone());

    for epoch in 0..config.epochs {
        for idx in batch_indices(reps.nrows(), batch_size, config.seed, epoch as u64)? {
            let x = reps.select(ndarray::Axis(0), &idx);
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let out = dense_forward(&layer, &x)?;
            let (_, d_logits) = softmax_ce_loss_grad(&out.act, &y)?;
            let (grads, _) = backprop_dense(&layer, &x, &out, &d_logits)?;
            adam.step(&mut layer, &grads, config.lr)?;
        }
        let acc = accuracy(&layer, val_reps, val_labels)?;
        if acc > best.0 {
            best = (acc, epoch, layer.clone());
        }
    }
    let (acc, best_epoch, layer) = best;
    Ok(ProbeOutcome {
        accuracy: acc,
        best_epoch,
        train_accuracy: accuracy(&layer, reps, labels)?,
        layer,
    })
}
