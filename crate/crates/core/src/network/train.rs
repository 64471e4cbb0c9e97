//! Mini-batch training loops for [`Mlp`] and [`Autoencoder`].

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, LayerAdam};
use super::autoencoder::Autoencoder;
use super::corrupt::dropout_mask;
use super::loss::{mse_loss_grad, softmax_ce_loss_grad};
use super::mlp::{DropoutMasks, Mlp};
use super::schedule::PlateauScheduler;
use crate::datasets::{make_batches, LabeledDataset};
use crate::error::{OvrError, Result};
use crate::regularizers::RegConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam: AdamConfig,
    pub scheduler: Option<PlateauScheduler>,
    pub seed: u64,
    /// MLP: inverted dropout on inputs. Autoencoder: denoising corruption
    /// (survivors unscaled).
    pub input_drop: f64,
    /// MLP only: inverted dropout on hidden activations.
    pub hidden_drop: f64,
    pub reg: RegConfig,
    /// Keep the parameters of the epoch with the lowest validation loss.
    pub select_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 75,
            batch_size: 128,
            lr: 1e-3,
            adam: AdamConfig::default(),
            scheduler: Some(PlateauScheduler::default()),
            seed: 0,
            input_drop: 0.0,
            hidden_drop: 0.0,
            reg: RegConfig::default(),
            select_best: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<M> {
    pub model: M,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Deterministic per-(epoch, batch, stream) seed for dropout masks.
pub(crate) fn mix_seed(seed: u64, epoch: usize, batch: usize, stream: u64) -> u64 {
    let mut z = seed
        ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (batch as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ stream.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn diverged(epoch: usize, lambda: f64) -> impl Fn(OvrError) -> OvrError {
    move |e| match e {
        OvrError::Numeric(detail) => OvrError::Divergence {
            epoch,
            lambda,
            detail,
        },
        other => other,
    }
}

fn check_finite(loss: f64, epoch: usize, lambda: f64, what: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(OvrError::Divergence {
            epoch,
            lambda,
            detail: format!("{what} is {loss}"),
        })
    }
}

fn validate(cfg: &TrainConfig, train: &LabeledDataset) -> Result<()> {
    cfg.reg.validate()?;
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(OvrError::InvalidArgument(
            "epochs, batch_size and lr must be positive".into(),
        ));
    }
    if cfg.batch_size > train.num_samples() {
        return Err(OvrError::InvalidArgument(format!(
            "batch_size {} exceeds {} training samples",
            cfg.batch_size,
            train.num_samples()
        )));
    }
    Ok(())
}

pub fn train_mlp(
    mut model: Mlp,
    cfg: &TrainConfig,
    train: &LabeledDataset,
    val: &LabeledDataset,
) -> Result<Trained<Mlp>> {
    validate(cfg, train)?;
    let lambda = cfg.reg.lambda;
    let mut opt_hidden = LayerAdam::new(&model.hidden, cfg.adam);
    let mut opt_output = LayerAdam::new(&model.output, cfg.adam);
    let mut scheduler = cfg.scheduler;
    let mut lr = cfg.lr;
    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let batches = make_batches(train, cfg.batch_size, cfg.seed, epoch as u64)?;
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let labels = batch.y.as_deref().unwrap_or_default();
            let masks = DropoutMasks {
                input: (cfg.input_drop > 0.0)
                    .then(|| dropout_mask(batch.x.dim(), cfg.input_drop, mix_seed(cfg.seed, epoch, b, 1), true))
                    .transpose()?,
                hidden: (cfg.hidden_drop > 0.0)
                    .then(|| {
                        dropout_mask(
                            (batch.len(), model.hidden.units()),
                            cfg.hidden_drop,
                            mix_seed(cfg.seed, epoch, b, 2),
                            true,
                        )
                    })
                    .transpose()?,
            };
            let (parts, grads) = model
                .objective(&batch.x, labels, &cfg.reg, &masks)
                .map_err(diverged(epoch, lambda))?;
            check_finite(parts.total(), epoch, lambda, "training loss")?;
            total += parts.total() * batch.len() as f64;
            opt_hidden.step(&mut model.hidden, &grads.hidden, lr).map_err(diverged(epoch, lambda))?;
            opt_output.step(&mut model.output, &grads.output, lr).map_err(diverged(epoch, lambda))?;
        }
        let train_loss = total / train.num_samples() as f64;
        let val_logits = model.logits(&val.x).map_err(diverged(epoch, lambda))?;
        let (val_loss, _) = softmax_ce_loss_grad(&val_logits, &val.y)?;
        check_finite(val_loss, epoch, lambda, "validation loss")?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        if cfg.select_best && best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, model.clone()));
        }
        if let Some(s) = scheduler.as_mut() {
            lr = s.observe(train_loss, lr);
        }
    }
    Ok(match best {
        Some((_, best_epoch, model)) => Trained {
            model,
            history,
            best_epoch,
        },
        None => Trained {
            model,
            best_epoch: cfg.epochs - 1,
            history,
        },
    })
}

pub fn train_autoencoder(
    mut model: Autoencoder,
    cfg: &TrainConfig,
    train: &LabeledDataset,
    val: &LabeledDataset,
) -> Result<Trained<Autoencoder>> {
    validate(cfg, train)?;
    let lambda = cfg.reg.lambda;
    let mut opt_enc = LayerAdam::new(&model.encoder, cfg.adam);
    let mut opt_dec = LayerAdam::new(&model.decoder, cfg.adam);
    let mut scheduler = cfg.scheduler;
    let mut lr = cfg.lr;
    let mut best: Option<(f64, usize, Autoencoder)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let batches = make_batches(train, cfg.batch_size, cfg.seed, epoch as u64)?;
        let mut total = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let input: Array2<f64> = if cfg.input_drop > 0.0 {
                &batch.x * &dropout_mask(batch.x.dim(), cfg.input_drop, mix_seed(cfg.seed, epoch, b, 1), false)?
            } else {
                batch.x.clone()
            };
            let (parts, grads) = model
                .objective(&input, &batch.x, &cfg.reg)
                .map_err(diverged(epoch, lambda))?;
            check_finite(parts.total(), epoch, lambda, "training loss")?;
            total += parts.total() * batch.len() as f64;
            opt_enc.step(&mut model.encoder, &grads.encoder, lr).map_err(diverged(epoch, lambda))?;
            opt_dec.step(&mut model.decoder, &grads.decoder, lr).map_err(diverged(epoch, lambda))?;
            model.sync_tied();
        }
        let train_loss = total / train.num_samples() as f64;
        let recon = model.reconstruct(&val.x).map_err(diverged(epoch, lambda))?;
        let (val_loss, _) = mse_loss_grad(&recon, &val.x)?;
        check_finite(val_loss, epoch, lambda, "validation loss")?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        if cfg.select_best && best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, model.clone()));
        }
        if let Some(s) = scheduler.as_mut() {
            lr = s.observe(train_loss, lr);
        }
    }
    Ok(match best {
        Some((_, best_epoch, model)) => Trained {
            model,
            history,
            best_epoch,
        },
        None => Trained {
            model,
            best_epoch: cfg.epochs - 1,
            history,
        },
    })
}
