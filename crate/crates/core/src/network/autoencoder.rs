use ndarray::Array2;
use rand::Rng;

use super::layer::{backprop_dense, dense_forward, Activation, DenseLayer, HiddenBatch, LayerGrads};
use super::loss::mse_loss_grad;
use super::mlp::ObjectiveParts;
use crate::error::Result;
use crate::regularizers::RegConfig;

/// Single-hidden-layer autoencoder with an MSE reconstruction cost.
///
/// With `tied` weights the decoder uses the transpose of the encoder weights;
/// `decoder.weights` is kept equal to `encoder.weights^T` by [`Autoencoder::sync_tied`].
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: DenseLayer,
    pub decoder: DenseLayer,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeGrads {
    pub encoder: LayerGrads,
    pub decoder: LayerGrads,
}

impl Autoencoder {
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        hidden_units: usize,
        activation: Activation,
        output_activation: Activation,
        tied: bool,
        rng: &mut R,
    ) -> Self {
        let encoder = DenseLayer::glorot("encoder", in_dim, hidden_units, activation, rng);
        let mut decoder = DenseLayer::glorot("decoder", hidden_units, in_dim, output_activation, rng);
        if tied {
            decoder.weights = encoder.weights.t().to_owned();
        }
        Self {
            encoder,
            decoder,
            tied,
        }
    }

    pub fn sync_tied(&mut self) {
        if self.tied {
            self.decoder.weights = self.encoder.weights.t().to_owned();
        }
    }

    pub fn encode(&self, x: &Array2<f64>) -> Result<HiddenBatch> {
        dense_forward(&self.encoder, x)
    }

    pub fn reconstruct(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let h = self.encode(x)?;
        Ok(dense_forward(&self.decoder, &h.act)?.act)
    }

    /// Reconstruction of `target` from `input` (a possibly corrupted copy)
    /// plus the penalty on hidden activations. With tied weights the decoder's
    /// weight gradient is folded into the encoder's and reported as zero.
    pub fn objective(
        &self,
        input: &Array2<f64>,
        target: &Array2<f64>,
        reg: &RegConfig,
    ) -> Result<(ObjectiveParts, AeGrads)> {
        let hidden = dense_forward(&self.encoder, input)?;
        let out = dense_forward(&self.decoder, &hidden.act)?;
        let (data, d_out) = mse_loss_grad(&out.act, target)?;
        let (mut dec_grads, mut d_h) = backprop_dense(&self.decoder, &hidden.act, &out, &d_out)?;
        let penalty = reg.penalty(&hidden.act)?;
        d_h += &penalty.grad;
        let (mut enc_grads, _) = backprop_dense(&self.encoder, input, &hidden, &d_h)?;
        if self.tied {
            enc_grads.weights += &dec_grads.weights.t();
            dec_grads.weights.fill(0.0);
        }
        Ok((
            ObjectiveParts {
                data,
                penalty: penalty.loss,
            },
            AeGrads {
                encoder: enc_grads,
                decoder: dec_grads,
            },
        ))
    }
}
