//! Activity regularizers on a batch of hidden representations `H`
//! (one row per sample), each returning the loss and `dLoss/dH`.
//!
//! The OVR penalty is the sum of all entries of the Gram matrix `H H^T`:
//! it measures how much the representations of different samples share
//! active units. Computed through column sums `S = sum_i h_i`:
//! `sum_{i,j} h_i . h_j = |S|^2`, and excluding self-pairs subtracts
//! `sum_j |h_j|^2`.

use ndarray::{Array1, Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_shape, OvrError, Result};

/// Norms below this are treated as all-zero rows by [`row_normalize`].
pub const ROW_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    #[default]
    None,
    Ovr,
    L1Activity,
    L2Activity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegConfig {
    pub kind: RegKind,
    pub lambda: f64,
    /// Count self-pairs `h_j . h_j` in the OVR sum.
    pub include_diagonal: bool,
    /// Normalise rows to unit length before the OVR sum.
    pub row_normalize: bool,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            kind: RegKind::None,
            lambda: 0.0,
            include_diagonal: false,
            row_normalize: true,
        }
    }
}

impl RegConfig {
    pub fn ovr(lambda: f64) -> Self {
        Self {
            kind: RegKind::Ovr,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(OvrError::InvalidArgument(format!(
                "regularization strength {} must be finite and >= 0",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `lambda * penalty(H)` and its gradient.
    pub fn penalty(&self, h: &Array2<f64>) -> Result<Penalty> {
        self.validate()?;
        let (loss, grad, degenerate_rows) = match self.kind {
            RegKind::None => return Ok(Penalty::zero(h)),
            RegKind::Ovr if self.row_normalize => {
                let normed = row_normalize(h);
                let (loss, d_hat) = ovr_loss_grad(&normed.hat, self.include_diagonal)?;
                (loss, normed.backward(&d_hat)?, normed.degenerate_rows)
            }
            RegKind::Ovr => {
                let (loss, grad) = ovr_loss_grad(h, self.include_diagonal)?;
                (loss, grad, 0)
            }
            RegKind::L1Activity => {
                let (loss, grad) = lp_activity_loss_grad(h, 1)?;
                (loss, grad, 0)
            }
            RegKind::L2Activity => {
                let (loss, grad) = lp_activity_loss_grad(h, 2)?;
                (loss, grad, 0)
            }
        };
        Ok(Penalty {
            loss: self.lambda * loss,
            grad: grad * self.lambda,
            degenerate_rows,
        })
    }
}

/// A weighted penalty value and its gradient with respect to `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub loss: f64,
    pub grad: Array2<f64>,
    /// Rows skipped by row normalisation because their norm was ~0.
    pub degenerate_rows: usize,
}

impl Penalty {
    fn zero(h: &Array2<f64>) -> Self {
        Self {
            loss: 0.0,
            grad: Array2::zeros(h.raw_dim()),
            degenerate_rows: 0,
        }
    }
}

/// OVR overlap `sum_{i,j} h_i . h_j` over ordered pairs, with or without `i = j`.
pub fn ovr_loss_grad(h: &Array2<f64>, include_diagonal: bool) -> Result<(f64, Array2<f64>)> {
    if h.is_empty() {
        return Err(OvrError::InvalidArgument("OVR loss of an empty batch".into()));
    }
    let col_sums = h.sum_axis(Axis(0));
    let all_pairs = col_sums.dot(&col_sums);
    let mut grad = Array2::zeros(h.raw_dim());
    grad += &(&col_sums * 2.0);
    if include_diagonal {
        return Ok((all_pairs, grad));
    }
    let self_pairs: f64 = h.iter().map(|v| v * v).sum();
    grad.scaled_add(-2.0, h);
    Ok((all_pairs - self_pairs, grad))
}

/// `|mean(H) - 0.5|` over every entry of `H`, with subgradient 0 at the kink.
pub fn activity_target_loss_grad(h: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if h.is_empty() {
        return Err(OvrError::InvalidArgument("activity loss of an empty batch".into()));
    }
    let count = h.len() as f64;
    let gap = h.sum() / count - 0.5;
    let sign = if gap > 0.0 {
        1.0
    } else if gap < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok((gap.abs(), Array2::from_elem(h.raw_dim(), sign / count)))
}

/// Mean `|h|` (p = 1) or mean `h^2` (p = 2).
pub fn lp_activity_loss_grad(h: &Array2<f64>, p: u32) -> Result<(f64, Array2<f64>)> {
    let count = h.len().max(1) as f64;
    match p {
        1 => Ok((
            h.iter().map(|v| v.abs()).sum::<f64>() / count,
            h.mapv(|v| {
                if v > 0.0 {
                    1.0 / count
                } else if v < 0.0 {
                    -1.0 / count
                } else {
                    0.0
                }
            }),
        )),
        2 => Ok((
            h.iter().map(|v| v * v).sum::<f64>() / count,
            h.mapv(|v| 2.0 * v / count),
        )),
        other => Err(OvrError::InvalidArgument(format!(
            "activity penalty order must be 1 or 2, got {other}"
        ))),
    }
}

/// Rows of `H` scaled to unit length, with what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RowNormalized {
    pub hat: Array2<f64>,
    pub norms: Array1<f64>,
    pub degenerate_rows: usize,
}

impl RowNormalized {
    /// Pulls `dL/dH_hat` back to `dL/dH`: `(g - h_hat (h_hat . g)) / |h|`,
    /// zero for degenerate rows.
    pub fn backward(&self, d_hat: &Array2<f64>) -> Result<Array2<f64>> {
        ensure_shape(d_hat.dim() == self.hat.dim(), || {
            format!("upstream {:?} vs normalised {:?}", d_hat.dim(), self.hat.dim())
        })?;
        let mut grad = Array2::zeros(self.hat.raw_dim());
        Zip::from(grad.rows_mut())
            .and(self.hat.rows())
            .and(d_hat.rows())
            .and(&self.norms)
            .for_each(|mut g, h_hat, up, &norm| {
                if norm < ROW_NORM_FLOOR {
                    return;
                }
                let proj = h_hat.dot(&up);
                Zip::from(&mut g)
                    .and(&h_hat)
                    .and(&up)
                    .for_each(|g, &hh, &u| *g = (u - hh * proj) / norm);
            });
        Ok(grad)
    }
}

pub fn row_normalize(h: &Array2<f64>) -> RowNormalized {
    let norms = h.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut hat = h.clone();
    let mut degenerate_rows = 0;
    for (mut row, &norm) in hat.rows_mut().into_iter().zip(&norms) {
        if norm < ROW_NORM_FLOOR {
            degenerate_rows += 1;
        } else {
            row /= norm;
        }
    }
    RowNormalized {
        hat,
        norms,
        degenerate_rows,
    }
}

/// Normalises rows of `H` and pulls `upstream = dL/dH_hat` back to `dL/dH`.
pub fn row_normalize_grad(h: &Array2<f64>, upstream: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let normed = row_normalize(h);
    let grad = normed.backward(upstream)?;
    Ok((normed.hat, grad))
}
