use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OvrError, Result};

/// Multiplicative keep mask: 0 with probability `drop_ratio`, otherwise 1
/// (or `1 / (1 - drop_ratio)` when `inverted`).
pub fn dropout_mask(
    shape: (usize, usize),
    drop_ratio: f64,
    seed: u64,
    inverted: bool,
) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&drop_ratio) {
        return Err(OvrError::InvalidArgument(format!(
            "drop ratio {drop_ratio} not in [0, 1)"
        )));
    }
    let keep = if inverted { 1.0 / (1.0 - drop_ratio) } else { 1.0 };
    if drop_ratio == 0.0 {
        return Ok(Array2::from_elem(shape, keep));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Array2::from_shape_fn(shape, |_| {
        if rng.random::<f64>() < drop_ratio {
            0.0
        } else {
            keep
        }
    }))
}

/// Zeroes each entry independently with probability `drop_ratio`.
///
/// Denoising corruption leaves survivors unscaled; `inverted` rescales them
/// by `1 / (1 - drop_ratio)` for dropout training.
pub fn corrupt_input(x: &Array2<f64>, drop_ratio: f64, seed: u64, inverted: bool) -> Result<Array2<f64>> {
    Ok(x * &dropout_mask(x.dim(), drop_ratio, seed, inverted)?)
}
