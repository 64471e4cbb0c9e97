use ndarray::Array2;
use rand::Rng;

use super::layer::{backprop_dense, dense_forward, Activation, DenseLayer, HiddenBatch, LayerGrads};
use super::loss::softmax_ce_loss_grad;
use crate::error::{ensure_shape, Result};
use crate::regularizers::RegConfig;

/// Single-hidden-layer classifier: hidden layer followed by a linear softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub hidden: LayerGrads,
    pub output: LayerGrads,
}

/// Multiplicative dropout masks (already scaled). `None` means no dropout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropoutMasks {
    pub input: Option<Array2<f64>>,
    pub hidden: Option<Array2<f64>>,
}

/// Data term and weighted penalty of a training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub data: f64,
    pub penalty: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.data + self.penalty
    }
}

fn apply_mask(x: &Array2<f64>, mask: Option<&Array2<f64>>) -> Result<Array2<f64>> {
    match mask {
        None => Ok(x.clone()),
        Some(m) => {
            ensure_shape(m.dim() == x.dim(), || {
                format!("dropout mask {:?} vs activations {:?}", m.dim(), x.dim())
            })?;
            Ok(x * m)
        }
    }
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        hidden_units: usize,
        classes: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: DenseLayer::glorot("hidden", in_dim, hidden_units, activation, rng),
            output: DenseLayer::glorot("output", hidden_units, classes, Activation::Identity, rng),
        }
    }

    pub fn hidden_forward(&self, x: &Array2<f64>) -> Result<HiddenBatch> {
        dense_forward(&self.hidden, x)
    }

    pub fn logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let h = self.hidden_forward(x)?;
        Ok(dense_forward(&self.output, &h.act)?.act)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(self
            .logits(x)?
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect())
    }

    pub fn accuracy(&self, x: &Array2<f64>, labels: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len().max(1) as f64)
    }

    /// Cross-entropy plus the activity penalty on the (pre-dropout) hidden
    /// activations, with gradients for both layers.
    pub fn objective(
        &self,
        x: &Array2<f64>,
        labels: &[usize],
        reg: &RegConfig,
        masks: &DropoutMasks,
    ) -> Result<(ObjectiveParts, MlpGrads)> {
        let x_in = apply_mask(x, masks.input.as_ref())?;
        let hidden = dense_forward(&self.hidden, &x_in)?;
        let h_drop = apply_mask(&hidden.act, masks.hidden.as_ref())?;
        let out = dense_forward(&self.output, &h_drop)?;
        let (data, d_logits) = softmax_ce_loss_grad(&out.act, labels)?;
        let (out_grads, d_h_drop) = backprop_dense(&self.output, &h_drop, &out, &d_logits)?;

        let penalty = reg.penalty(&hidden.act)?;
        let mut d_h = match &masks.hidden {
            Some(m) => d_h_drop * m,
            None => d_h_drop,
        };
        d_h += &penalty.grad;
        let (hidden_grads, _) = backprop_dense(&self.hidden, &x_in, &hidden, &d_h)?;
        Ok((
            ObjectiveParts {
                data,
                penalty: penalty.loss,
            },
            MlpGrads {
                hidden: hidden_grads,
                output: out_grads,
            },
        ))
    }
}
