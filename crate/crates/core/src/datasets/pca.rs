//! Principal component analysis without whitening.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use crate::error::{ensure_shape, OvrError, Result};

/// Mean and the leading principal directions (rows of `components`,
/// descending variance).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    pub components: Array2<f64>,
    pub variances: Array1<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn out_dims(&self) -> usize {
        self.components.nrows()
    }
}

/// Top `out_dims` eigenvectors of the sample covariance. Each component is
/// signed so that its largest-magnitude entry is positive.
pub fn fit_pca(x: &Array2<f64>, out_dims: usize) -> Result<PcaModel> {
    let (n, dim) = x.dim();
    if n < 2 {
        return Err(OvrError::InvalidArgument(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if out_dims == 0 || out_dims > n.min(dim) {
        return Err(OvrError::InvalidArgument(format!(
            "out_dims {out_dims} must be in 1..={}",
            n.min(dim)
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);

    let eig = SymmetricEigen::new(DMatrix::from_fn(dim, dim, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Array2::zeros((out_dims, dim));
    let mut variances = Array1::zeros(out_dims);
    for (row, &idx) in order.iter().take(out_dims).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let pivot = v
            .iter()
            .copied()
            .reduce(|best, e| if e.abs() > best.abs() { e } else { best })
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, &e) in components.row_mut(row).iter_mut().zip(v.iter()) {
            *dst = sign * e;
        }
        variances[row] = eig.eigenvalues[idx].max(0.0);
    }
    // clamping can only break ordering among values that were ~0 already
    for i in 1..out_dims {
        if variances[i] > variances[i - 1] {
            variances[i] = variances[i - 1];
        }
    }
    Ok(PcaModel {
        mean,
        components,
        variances,
    })
}

/// `(X - mean) * components^T`.
pub fn pca_transform(model: &PcaModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_shape(x.ncols() == model.dim(), || {
        format!("input has {} columns, PCA expects {}", x.ncols(), model.dim())
    })?;
    Ok((x - &model.mean).dot(&model.components.t()))
}

/// `Z * components + mean`.
pub fn pca_inverse(model: &PcaModel, z: &Array2<f64>) -> Result<Array2<f64>> {
    ensure_shape(z.ncols() == model.out_dims(), || {
        format!(
            "codes have {} columns, PCA has {} components",
            z.ncols(),
            model.out_dims()
        )
    })?;
    Ok(z.dot(&model.components) + &model.mean)
}
