//! Finite-difference and random-instance helpers shared by unit tests.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Central differences of `f` with respect to every entry of `at`.
pub fn numeric_grad(at: &Array2<f64>, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut probe = at.clone();
    let mut grad = Array2::zeros(at.raw_dim());
    for idx in ndarray::indices(at.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + FD_STEP;
        let up = f(&probe);
        probe[idx] = orig - FD_STEP;
        let down = f(&probe);
        probe[idx] = orig;
        grad[idx] = (up - down) / (2.0 * FD_STEP);
    }
    grad
}

/// max |a - n| / max(1, max|n|): relative to the gradient's scale, so
/// entries that are exactly zero analytically do not blow up the ratio.
pub fn rel_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let scale = numeric.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric.iter())
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()))
        / scale
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}
