use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::layer::{DenseLayer, LayerGrads};
use crate::error::{ensure_shape, OvrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<D: Dimension> {
    pub config: AdamConfig,
    pub m: Array<f64, D>,
    pub v: Array<f64, D>,
    pub t: u64,
}

impl<D: Dimension> AdamState<D> {
    pub fn new(shape: D, config: AdamConfig) -> Self {
        Self {
            config,
            m: Array::zeros(shape.clone()),
            v: Array::zeros(shape),
            t: 0,
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_step<D: Dimension>(
    state: &mut AdamState<D>,
    param: &mut Array<f64, D>,
    grad: &Array<f64, D>,
    lr: f64,
) -> Result<()> {
    ensure_shape(
        param.shape() == grad.shape() && param.shape() == state.m.shape(),
        || format!("adam: param {:?}, grad {:?}, state {:?}", param.shape(), grad.shape(), state.m.shape()),
    )?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(OvrError::Numeric("adam gradient".into()));
    }
    let AdamConfig { beta1, beta2, eps } = state.config;
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    Zip::from(param)
        .and(&mut state.m)
        .and(&mut state.v)
        .and(grad)
        .for_each(|p, m, v, &g| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
    Ok(())
}

/// Adam state for a dense layer's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAdam {
    pub weights: AdamState<ndarray::Ix2>,
    pub bias: AdamState<ndarray::Ix1>,
}

impl LayerAdam {
    pub fn new(layer: &DenseLayer, config: AdamConfig) -> Self {
        Self {
            weights: AdamState::new(layer.weights.raw_dim(), config),
            bias: AdamState::new(layer.bias.raw_dim(), config),
        }
    }

    pub fn step(&mut self, layer: &mut DenseLayer, grads: &LayerGrads, lr: f64) -> Result<()> {
        adam_step(&mut self.weights, &mut layer.weights, &grads.weights, lr)?;
        adam_step(&mut self.bias, &mut layer.bias, &grads.bias, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1};

    /// Textbook scalar Adam, kept independent of the array code.
    fn scalar_adam(mut p: f64, grads: &[f64], lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut m, mut v) = (0.0, 0.0);
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mhat = m / (1.0 - b1.powi(t));
            let vhat = v / (1.0 - b2.powi(t));
            p -= lr * mhat / (vhat.sqrt() + eps);
        }
        p
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = arr1(&[0.3, -1.2, 4.0]);
        let orig = p.clone();
        let mut s = AdamState::new(p.raw_dim(), AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut s, &mut p, &Array1::zeros(3), 0.1).unwrap();
        }
        assert_eq!(p, orig);
        assert_eq!(s.t, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = arr1(&[0.0]);
        let mut s = AdamState::new(p.raw_dim(), AdamConfig::default());
        adam_step(&mut s, &mut p, &arr1(&[1.0]), 0.001).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-10);
        assert_eq!(p[0], scalar_adam(0.0, &[1.0], 0.001));
    }

    #[test]
    fn matches_scalar_reference_over_many_steps() {
        let grads = [0.5, -1.0, 2.0, 0.1, 0.0, -0.3];
        let mut p = arr1(&[1.0]);
        let mut s = AdamState::new(p.raw_dim(), AdamConfig::default());
        for &g in &grads {
            adam_step(&mut s, &mut p, &arr1(&[g]), 0.01).unwrap();
        }
        assert!((p[0] - scalar_adam(1.0, &grads, 0.01)).abs() < 1e-15);
    }

    #[test]
    fn identical_gradients_identical_updates() {
        let mut p = arr1(&[2.0, 2.0]);
        let mut s = AdamState::new(p.raw_dim(), AdamConfig::default());
        adam_step(&mut s, &mut p, &arr1(&[0.7, 0.7]), 0.01).unwrap();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut p = arr1(&[0.0, 0.0]);
        let mut s = AdamState::new(p.raw_dim(), AdamConfig::default());
        assert!(matches!(
            adam_step(&mut s, &mut p, &arr1(&[f64::NAN, 0.0]), 0.1),
            Err(OvrError::Numeric(_))
        ));
        assert!(matches!(adam_step(&mut s, &mut p, &arr1(&[0.0]), 0.1), Err(OvrError::Shape(_))));
    }
}
