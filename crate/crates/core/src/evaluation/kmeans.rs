//! Sequential (MacQueen) k-means and the feature maps built on its centroids.

use ndarray::{Array1, Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_shape, OvrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    /// Points assigned to each centroid over all passes.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KMeansEncoding {
    /// `max(0, mean_k z_k - z_k)` with `z_k` the distance to centroid `k`.
    #[default]
    Triangle,
    /// One-hot nearest centroid.
    Hard,
}

fn nearest(centroids: &Array2<f64>, x: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let d: f64 = c.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Centroids start at `k` distinct seeded samples with zero counts; each
/// visited point moves its nearest centroid by `(x - c) / count`.
pub fn kmeans_fit(x: &Array2<f64>, k: usize, epochs: usize, seed: u64) -> Result<KMeansModel> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(OvrError::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    if epochs == 0 {
        return Err(OvrError::InvalidArgument("k-means needs at least one pass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = index::sample(&mut rng, n, k).into_vec();
    let mut centroids = x.select(Axis(0), &init);
    let mut counts = vec![0usize; k];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = x.row(i);
            let c = nearest(&centroids, row);
            counts[c] += 1;
            let step = 1.0 / counts[c] as f64;
            centroids
                .row_mut(c)
                .zip_mut_with(&row, |cv, &xv| *cv += (xv - *cv) * step);
        }
    }
    Ok(KMeansModel { centroids, counts })
}

/// Euclidean distances from every row of `x` to every centroid.
fn distances(model: &KMeansModel, x: &Array2<f64>) -> Array2<f64> {
    let x_sq = x.map_axis(Axis(1), |r| r.dot(&r));
    let c_sq: Array1<f64> = model.centroids.map_axis(Axis(1), |r| r.dot(&r));
    let mut d = x.dot(&model.centroids.t()) * -2.0;
    for (mut row, &xs) in d.rows_mut().into_iter().zip(&x_sq) {
        row.zip_mut_with(&c_sq, |v, &cs| *v = (*v + xs + cs).max(0.0).sqrt());
    }
    d
}

pub fn kmeans_encode(model: &KMeansModel, x: &Array2<f64>, mode: KMeansEncoding) -> Result<Array2<f64>> {
    ensure_shape(x.ncols() == model.centroids.ncols(), || {
        format!("input width {} vs centroid width {}", x.ncols(), model.centroids.ncols())
    })?;
    let mut d = distances(model, x);
    match mode {
        KMeansEncoding::Triangle => {
            for mut row in d.rows_mut() {
                let mean = row.mean().expect("k >= 1");
                row.mapv_inplace(|z| (mean - z).max(0.0));
            }
        }
        KMeansEncoding::Hard => {
            for mut row in d.rows_mut() {
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v < row[best] {
                        best = k;
                    }
                }
                row.fill(0.0);
                row[best] = 1.0;
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;
    use ndarray::array;

    #[test]
    fn one_cluster_single_pass_is_exact_mean() {
        let x = random_matrix(57, 3, -5.0, 5.0, 1);
        let model = kmeans_fit(&x, 1, 1, 9).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        for (a, b) in model.centroids.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(model.counts, vec![57]);
    }

    #[test]
    fn separated_blobs() {
        let a = random_matrix(100, 2, -0.3, 0.3, 2);
        let b = random_matrix(100, 2, -0.3, 0.3, 3) + 5.0;
        let x = ndarray::concatenate![Axis(0), a, b];
        let model = kmeans_fit(&x, 2, 3, 4).unwrap();
        let ma = a.mean_axis(Axis(0)).unwrap();
        let mb = b.mean_axis(Axis(0)).unwrap();
        for m in [ma, mb] {
            let closest = model
                .centroids
                .rows()
                .into_iter()
                .map(|c| (&c - &m).mapv(f64::abs).fold(0.0f64, |x, &y| x.max(y)))
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 0.1, "blob mean missed by {closest}");
        }
        assert!(model.counts.iter().all(|&c| c >= 1));
        assert_eq!(model, kmeans_fit(&x, 2, 3, 4).unwrap());
    }

    #[test]
    fn encodings() {
        let model = KMeansModel {
            centroids: array![[1.0, 0.0], [-1.0, 0.0]],
            counts: vec![1, 1],
        };
        let hard = kmeans_encode(&model, &array![[-1.0, 0.0]], KMeansEncoding::Hard).unwrap();
        assert_eq!(hard, array![[0.0, 1.0]]);
        let tri = kmeans_encode(&model, &array![[0.0, 0.0], [0.0, 3.0]], KMeansEncoding::Triangle).unwrap();
        assert!(tri.iter().all(|&v| v == 0.0));
        let x = random_matrix(20, 2, -2.0, 2.0, 1);
        let tri = kmeans_encode(&model, &x, KMeansEncoding::Triangle).unwrap();
        for row in tri.rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!(row.iter().any(|&v| v == 0.0));
        }
        assert!(kmeans_encode(&model, &Array2::zeros((1, 3)), KMeansEncoding::Hard).is_err());
    }

    #[test]
    fn bad_k() {
        let x = random_matrix(3, 2, 0.0, 1.0, 1);
        assert!(kmeans_fit(&x, 0, 1, 0).is_err());
        assert!(kmeans_fit(&x, 4, 1, 0).is_err());
    }
}
