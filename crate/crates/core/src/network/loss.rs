use ndarray::{Array2, Axis};

use crate::error::{ensure_shape, OvrError, Result};

/// Mean squared error over all entries and its gradient.
pub fn mse_loss_grad(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    ensure_shape(pred.dim() == target.dim(), || {
        format!("prediction {:?} vs target {:?}", pred.dim(), target.dim())
    })?;
    let count = pred.len() as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff * (2.0 / count)))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Mean cross-entropy of softmax(logits) against integer labels, with
/// gradient `(softmax - onehot) / batch`.
pub fn softmax_ce_loss_grad(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (n, classes) = logits.dim();
    ensure_shape(n == labels.len() && n > 0, || {
        format!("{n} logit rows but {} labels", labels.len())
    })?;
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(OvrError::InvalidLabel {
            label,
            class_count: classes,
        });
    }
    let mut loss = 0.0;
    let mut grad = Array2::zeros((n, classes));
    for ((row, mut g), &label) in logits.axis_iter(Axis(0)).zip(grad.rows_mut()).zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - row[label];
        for (gj, &v) in g.iter_mut().zip(row.iter()) {
            *gj = (v - log_sum).exp() / n as f64;
        }
        g[label] -= 1.0 / n as f64;
    }
    if !loss.is_finite() {
        return Err(OvrError::Numeric("softmax cross-entropy".into()));
    }
    Ok((loss / n as f64, grad))
}
