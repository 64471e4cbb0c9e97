//! Single-layer encoder trained without reconstruction or backpropagation
//! through other layers.
//!
//! The cost of a batch `H` is `J = |mean(H) - 0.5| + lambda * OVR(H)`: the
//! anchor term keeps units from all switching off, the overlap term pushes
//! representations of different samples onto different units.
//!
//! Two update rules are provided. [`UpdateRule::PaperLocal`] moves unit `k`'s
//! weights by `-lr * lambda * sum_j h_jk * sum_{i != j} x_i`: each neuron only
//! needs its own responses and the batch inputs. [`UpdateRule::ExactGradient`]
//! descends `dJ/dW` including the activation derivative. Under the identity
//! activation without self-pairs the local direction is exactly half the
//! exact one.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{make_batches, LabeledDataset};
use crate::error::{ensure_shape, OvrError, Result};
use crate::evaluation::{default_tau, sparsity};
use crate::network::{
    backprop_dense, dense_forward, Activation, AdamConfig, DenseLayer, HiddenBatch, LayerAdam, LayerGrads,
};
use crate::regularizers::{activity_target_loss_grad, ovr_loss_grad, row_normalize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    PaperLocal,
    ExactGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OvrEncoderConfig {
    pub hidden_units: usize,
    pub lambda: f64,
    pub activation: Activation,
    pub update_rule: UpdateRule,
    pub step_rule: StepRule,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub use_bias: bool,
    pub include_diagonal: bool,
    /// Apply the overlap term to unit-normalised rows (exact rule only).
    pub row_normalize: bool,
    /// Train with the `|mean(H) - 0.5|` anchor. Disabling it exposes the
    /// all-zero solution of the bare overlap cost.
    pub activity_term: bool,
    pub adam: AdamConfig,
}

impl Default for OvrEncoderConfig {
    fn default() -> Self {
        Self {
            hidden_units: 8192,
            lambda: 1e-4,
            activation: Activation::Sigmoid,
            update_rule: UpdateRule::PaperLocal,
            step_rule: StepRule::Adam,
            batch_size: 128,
            lr: 1e-3,
            epochs: 30,
            seed: 0,
            use_bias: true,
            include_diagonal: false,
            row_normalize: false,
            activity_term: true,
            adam: AdamConfig::default(),
        }
    }
}

impl OvrEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OvrError::InvalidArgument(m));
        if self.hidden_units == 0 || self.epochs == 0 || self.batch_size == 0 {
            return bad("hidden_units, epochs and batch_size must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if !(self.lr > 0.0) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if self.lambda > 0.0 && self.update_rule == UpdateRule::PaperLocal && self.batch_size < 2 {
            return bad("the local overlap update needs batch_size >= 2".into());
        }
        if self.row_normalize && self.update_rule == UpdateRule::PaperLocal {
            return bad("row_normalize is only defined for the exact-gradient rule".into());
        }
        Ok(())
    }

    fn objective(&self) -> EncoderObjective {
        EncoderObjective {
            lambda: self.lambda,
            include_diagonal: self.include_diagonal,
            row_normalize: self.row_normalize,
            activity_term: self.activity_term,
        }
    }
}

/// Which terms make up the encoder cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderObjective {
    pub lambda: f64,
    pub include_diagonal: bool,
    pub row_normalize: bool,
    pub activity_term: bool,
}

impl EncoderObjective {
    pub fn new(lambda: f64, include_diagonal: bool) -> Self {
        Self {
            lambda,
            include_diagonal,
            row_normalize: false,
            activity_term: true,
        }
    }

    /// Cost and `dJ/dH`.
    pub fn cost_grad(&self, h: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        let (mut cost, mut grad) = if self.activity_term {
            activity_target_loss_grad(h)?
        } else {
            if h.is_empty() {
                return Err(OvrError::InvalidArgument("cost of an empty batch".into()));
            }
            (0.0, Array2::zeros(h.raw_dim()))
        };
        if self.lambda > 0.0 {
            let (ovr, d_ovr) = if self.row_normalize {
                let normed = row_normalize(h);
                let (loss, d_hat) = ovr_loss_grad(&normed.hat, self.include_diagonal)?;
                (loss, normed.backward(&d_hat)?)
            } else {
                ovr_loss_grad(h, self.include_diagonal)?
            };
            cost += self.lambda * ovr;
            grad.scaled_add(self.lambda, &d_ovr);
        }
        Ok((cost, grad))
    }
}

/// `J = |mean(H) - 0.5| + lambda * OVR(H)`.
pub fn cost_j(h: &Array2<f64>, lambda: f64, include_diagonal: bool) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(OvrError::InvalidArgument(format!("lambda {lambda} must be >= 0")));
    }
    Ok(EncoderObjective::new(lambda, include_diagonal).cost_grad(h)?.0)
}

pub fn encoder_forward(layer: &DenseLayer, x: &Array2<f64>) -> Result<HiddenBatch> {
    dense_forward(layer, x)
}

/// The overlap part of the local rule as a descent direction (the update is
/// `-lr` times this): row `k` is `lambda * sum_j h_jk * sum_{i != j} x_i`.
pub fn local_ovr_direction(x: &Array2<f64>, h: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    ensure_shape(x.nrows() == h.nrows(), || {
        format!("{} inputs but {} hidden rows", x.nrows(), h.nrows())
    })?;
    // sum_j h_jk (X_sum - x_j) = S_k X_sum - (H^T X)_k
    let x_sum = x.sum_axis(Axis(0));
    let s = h.sum_axis(Axis(0));
    let mut dir = h.t().dot(x) * -1.0;
    for (mut row, &s_k) in dir.rows_mut().into_iter().zip(&s) {
        row.scaled_add(s_k, &x_sum);
    }
    Ok(dir * lambda)
}

/// Local rule: overlap direction without the activation derivative, plus the
/// anchor term's exact gradient, which is also the only bias signal.
pub fn local_direction(
    layer: &DenseLayer,
    x: &Array2<f64>,
    hidden: &HiddenBatch,
    objective: &EncoderObjective,
) -> Result<LayerGrads> {
    let mut grads = if objective.activity_term {
        let (_, d_h) = activity_target_loss_grad(&hidden.act)?;
        backprop_dense(layer, x, hidden, &d_h)?.0
    } else {
        LayerGrads::zeros_like(layer)
    };
    if objective.lambda > 0.0 {
        grads.weights += &local_ovr_direction(x, &hidden.act, objective.lambda)?;
    }
    Ok(grads)
}

/// `dJ/dW`, `dJ/db` through the layer's activation.
pub fn exact_direction(
    layer: &DenseLayer,
    x: &Array2<f64>,
    hidden: &HiddenBatch,
    objective: &EncoderObjective,
) -> Result<LayerGrads> {
    let (_, d_h) = objective.cost_grad(&hidden.act)?;
    Ok(backprop_dense(layer, x, hidden, &d_h)?.0)
}

/// Encoder parameters plus optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrEncoder {
    pub layer: DenseLayer,
    pub config: OvrEncoderConfig,
    adam: LayerAdam,
}

impl OvrEncoder {
    pub fn new(in_dim: usize, config: OvrEncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layer = DenseLayer::glorot("ovr_encoder", in_dim, config.hidden_units, config.activation, &mut rng);
        Ok(Self::from_layer(layer, config))
    }

    pub fn from_layer(layer: DenseLayer, config: OvrEncoderConfig) -> Self {
        let adam = LayerAdam::new(&layer, config.adam);
        Self { layer, config, adam }
    }

    fn apply(&mut self, mut grads: LayerGrads) -> Result<()> {
        if !self.config.use_bias {
            grads.bias.fill(0.0);
        }
        match self.config.step_rule {
            StepRule::Adam => self.adam.step(&mut self.layer, &grads, self.config.lr),
            StepRule::Sgd => {
                if grads.weights.iter().chain(grads.bias.iter()).any(|g| !g.is_finite()) {
                    return Err(OvrError::Numeric("encoder update".into()));
                }
                self.layer.weights.scaled_add(-self.config.lr, &grads.weights);
                self.layer.bias.scaled_add(-self.config.lr, &grads.bias);
                Ok(())
            }
        }
    }

    pub fn local_update(&mut self, x: &Array2<f64>, hidden: &HiddenBatch) -> Result<()> {
        let grads = local_direction(&self.layer, x, hidden, &self.config.objective())?;
        self.apply(grads)
    }

    pub fn exact_update(&mut self, x: &Array2<f64>, hidden: &HiddenBatch) -> Result<()> {
        let grads = exact_direction(&self.layer, x, hidden, &self.config.objective())?;
        self.apply(grads)
    }

    /// One update on a batch; returns the batch cost before the update.
    pub fn step(&mut self, x: &Array2<f64>) -> Result<f64> {
        let hidden = encoder_forward(&self.layer, x)?;
        let (cost, _) = self.config.objective().cost_grad(&hidden.act)?;
        match self.config.update_rule {
            UpdateRule::PaperLocal => self.local_update(x, &hidden)?,
            UpdateRule::ExactGradient => self.exact_update(x, &hidden)?,
        }
        Ok(cost)
    }

    pub fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(encoder_forward(&self.layer, x)?.act)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderEpoch {
    pub epoch: usize,
    /// Mean batch cost over the epoch.
    pub cost: f64,
    /// Grand mean activation on the full training set after the epoch.
    pub mean_activation: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEncoder {
    pub encoder: OvrEncoder,
    pub history: Vec<EncoderEpoch>,
}

fn divergence(epoch: usize, lambda: f64) -> impl Fn(OvrError) -> OvrError {
    move |e| match e {
        OvrError::Numeric(detail) => OvrError::Divergence { epoch, lambda, detail },
        other => other,
    }
}

pub fn train_ovr_encoder(config: &OvrEncoderConfig, data: &LabeledDataset) -> Result<TrainedEncoder> {
    config.validate()?;
    if config.batch_size > data.num_samples() {
        return Err(OvrError::InvalidArgument(format!(
            "batch_size {} exceeds {} samples",
            config.batch_size,
            data.num_samples()
        )));
    }
    let mut encoder = OvrEncoder::new(data.dim(), config.clone())?;
    let tau = default_tau(config.activation);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let batches = make_batches(data, config.batch_size, config.seed, epoch as u64)?;
        let mut total = 0.0;
        for batch in &batches {
            let cost = encoder.step(&batch.x).map_err(divergence(epoch, config.lambda))?;
            if !cost.is_finite() {
                return Err(OvrError::Divergence {
                    epoch,
                    lambda: config.lambda,
                    detail: format!("cost J is {cost}"),
                });
            }
            total += cost;
        }
        let h = encoder.encode(&data.x).map_err(divergence(epoch, config.lambda))?;
        let report = sparsity(&h, tau)?;
        history.push(EncoderEpoch {
            epoch,
            cost: total / batches.len() as f64,
            mean_activation: report.mean_activation,
            sparsity: report.mean_sparsity,
        });
    }
    Ok(TrainedEncoder { encoder, history })
}
