use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_shape, OvrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Also used for output layers that feed a loss directly.
    Identity,
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
            Activation::Relu => a.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `h`.
    pub fn derivative(self, a: f64, h: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = OvrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(Activation::Identity),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(OvrError::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}

/// Affine map plus activation. Row `k` of `weights` is unit `k`'s weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub name: String,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        name: impl Into<String>,
        weights: Array2<f64>,
        bias: Array1<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let name = name.into();
        ensure_shape(weights.nrows() == bias.len(), || {
            format!(
                "layer {name}: {} weight rows but {} biases",
                weights.nrows(),
                bias.len()
            )
        })?;
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(OvrError::Numeric(format!("layer {name} parameters")));
        }
        Ok(Self {
            name,
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        name: impl Into<String>,
        in_dim: usize,
        units: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + units) as f64).sqrt();
        Self {
            name: name.into(),
            weights: Array2::from_shape_fn((units, in_dim), |_| rng.random_range(-limit..limit)),
            bias: Array1::zeros(units),
            activation,
        }
    }

    pub fn units(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<HiddenBatch> {
        dense_forward(self, x)
    }
}

/// Pre-activations and activations of a batch, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBatch {
    pub pre: Array2<f64>,
    pub act: Array2<f64>,
}

/// Gradients of a scalar objective with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: Array2::zeros(layer.weights.raw_dim()),
            bias: Array1::zeros(layer.bias.len()),
        }
    }
}

/// `A = X W^T + b`, `H = activation(A)`.
pub fn dense_forward(layer: &DenseLayer, x: &Array2<f64>) -> Result<HiddenBatch> {
    ensure_shape(x.ncols() == layer.in_dim(), || {
        format!(
            "layer {}: input has {} columns, expected {}",
            layer.name,
            x.ncols(),
            layer.in_dim()
        )
    })?;
    let pre = x.dot(&layer.weights.t()) + &layer.bias;
    let act = pre.mapv(|a| layer.activation.apply(a));
    if act.iter().any(|v| !v.is_finite()) {
        return Err(OvrError::Numeric(format!("layer {} forward pass", layer.name)));
    }
    Ok(HiddenBatch { pre, act })
}

/// Backpropagates `dH` through one layer. Returns parameter gradients and `dX`.
pub fn backprop_dense(
    layer: &DenseLayer,
    x: &Array2<f64>,
    hidden: &HiddenBatch,
    d_act: &Array2<f64>,
) -> Result<(LayerGrads, Array2<f64>)> {
    ensure_shape(
        x.ncols() == layer.in_dim() && x.nrows() == hidden.act.nrows(),
        || format!("layer {}: input {:?} inconsistent with hidden batch", layer.name, x.dim()),
    )?;
    ensure_shape(
        d_act.dim() == hidden.act.dim() && hidden.pre.dim() == hidden.act.dim(),
        || {
            format!(
                "layer {}: upstream gradient {:?} vs activations {:?}",
                layer.name,
                d_act.dim(),
                hidden.act.dim()
            )
        },
    )?;
    let mut d_pre = d_act.clone();
    if layer.activation != Activation::Identity {
        ndarray::Zip::from(&mut d_pre)
            .and(&hidden.pre)
            .and(&hidden.act)
            .for_each(|d, &a, &h| *d *= layer.activation.derivative(a, h));
    }
    let grads = LayerGrads {
        weights: d_pre.t().dot(x),
        bias: d_pre.sum_axis(Axis(0)),
    };
    let dx = d_pre.dot(&layer.weights);
    Ok((grads, dx))
}
