use std::path::{Path, PathBuf};

use ndarray::Array2;
use ovr_cli::config::ModelKind;
use ovr_cli::{RunRecord, RunStatus};
use ovr_core::network::Activation;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden_records() -> Vec<RunRecord> {
    let hash = "ab".repeat(32);
    let base = RunRecord {
        run_id: "0123456789ab".into(),
        model: ModelKind::OvrEncoder,
        hidden: 64,
        lambda: 1e-4,
        activation: Activation::Sigmoid,
        seed: 2,
        epoch: 0,
        train_loss: Some(0.5),
        val_loss: None,
        sparsity: Some(0.25),
        mean_activation: Some(0.125),
        probe_accuracy: None,
        wall_time_seconds: 1.5,
        status: RunStatus::Epoch,
        message: String::new(),
        config_hash: hash.clone(),
        version: "0.1.0".into(),
    };
    vec![
        base.clone(),
        RunRecord {
            epoch: 29,
            train_loss: Some(0.375),
            sparsity: Some(0.75),
            mean_activation: Some(0.0625),
            probe_accuracy: Some(0.875),
            status: RunStatus::Final,
            ..base.clone()
        },
        RunRecord {
            run_id: "cdef01234567".into(),
            model: ModelKind::Mlp,
            hidden: 8,
            lambda: 1e-5,
            activation: Activation::Relu,
            seed: 0,
            train_loss: None,
            sparsity: None,
            mean_activation: None,
            wall_time_seconds: 0.25,
            status: RunStatus::Failed,
            message: "training diverged, \"nan\" loss".into(),
            ..base
        },
    ]
}

/// Three pixel-space features: a sawtooth, a constant and a sine with a
/// sign flip between the red and the other planes.
pub fn golden_feature_images() -> Array2<f64> {
    Array2::from_shape_fn((3, 3072), |(f, i)| match f {
        0 => ((i * 37) % 101) as f64 / 7.0,
        1 => 2.5,
        _ => (i as f64 * 0.01).sin() * if i < 1024 { 1.0 } else { -2.0 },
    })
}
