//! Acceptance suite. Each test prints one `criterion N` line with its
//! measured values and PASS or FAIL, then asserts.
//!
//! Criterion 7 needs CIFAR-10 and is ignored unless requested:
//! `OVR_CIFAR_DIR=/path/to/cifar-10-batches-bin cargo test --release --test acceptance -- --ignored --nocapture`.

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use ovr_cli::config::{DatasetConfig, ModelKind};
use ovr_cli::features::{ppm_bytes, tile_images};
use ovr_cli::runner::{execute, prepare_data, PreparedData};
use ovr_cli::{read_records, write_records, ExperimentConfig, RunRecord, RunStatus};
use ovr_core::datasets::{parse_cifar_batch, CIFAR_IMAGE_BYTES, CIFAR_RECORDS_PER_FILE};
use ovr_core::error::OvrError;
use ovr_core::network::{
    mse_loss_grad, softmax_ce_loss_grad, Activation, Autoencoder, Checkpoint, DenseLayer, DropoutMasks, Mlp,
    NamedArray,
};
use ovr_core::ovr_encoder::{exact_direction, local_ovr_direction, EncoderObjective, UpdateRule};
use ovr_core::regularizers::{activity_target_loss_grad, lp_activity_loss_grad, ovr_loss_grad, RegConfig, RegKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to the stderr handle, which the test harness does not
/// capture, so the line shows up in every run.
fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id} ({name}): {verdict} | {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// Finite differences

const FD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const INSTANCES: usize = 25;

/// Central differences of `f` with respect to the slice `field` selects.
fn numeric_grad<M: Clone>(model: &M, field: impl Fn(&mut M) -> &mut [f64], f: impl Fn(&M) -> f64) -> Vec<f64> {
    let mut probe = model.clone();
    let len = field(&mut probe).len();
    (0..len)
        .map(|i| {
            let mut plus = model.clone();
            field(&mut plus)[i] += FD_STEP;
            let mut minus = model.clone();
            field(&mut minus)[i] -= FD_STEP;
            (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `max |a - n| / max(max |n|, 1e-6)`.
fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = numeric.iter().map(|n| n.abs()).fold(1e-6, f64::max);
    diff / scale
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

/// Entries with magnitude in `[0.05, 1)` and random sign, away from the L1 kink.
fn signed_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn mat(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

fn vec1(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

/// Worst relative error of a scalar function of a matrix over random instances.
fn check_matrix_fn(
    rng: &mut ChaCha8Rng,
    sample: impl Fn(&mut ChaCha8Rng) -> Array2<f64>,
    f: impl Fn(&Array2<f64>) -> (f64, Array2<f64>),
) -> f64 {
    (0..INSTANCES)
        .map(|_| {
            let h = sample(rng);
            let (_, grad) = f(&h);
            let numeric = numeric_grad(&h, mat, |m| f(m).0);
            rel_error(&flat(&grad), &numeric)
        })
        .fold(0.0, f64::max)
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(2..=6), rng.random_range(1..=5))
}

fn random_reg(rng: &mut ChaCha8Rng) -> RegConfig {
    let kind = [RegKind::None, RegKind::Ovr, RegKind::L1Activity, RegKind::L2Activity][rng.random_range(0..4)];
    RegConfig {
        kind,
        lambda: rng.random_range(0.1..2.0),
        include_diagonal: rng.random_bool(0.5),
        row_normalize: rng.random_bool(0.5),
    }
}

fn smooth_activation(rng: &mut ChaCha8Rng) -> Activation {
    if rng.random_bool(0.5) {
        Activation::Sigmoid
    } else {
        Activation::Identity
    }
}

fn random_layer(rng: &mut ChaCha8Rng, name: &str, in_dim: usize, units: usize, act: Activation) -> DenseLayer {
    DenseLayer::new(
        name,
        random_matrix(rng, units, in_dim, -1.0, 1.0),
        Array1::from_shape_fn(units, |_| rng.random_range(-0.5..0.5)),
        act,
    )
    .unwrap()
}

fn mlp_worst(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (n, k) = dims(rng);
        let (d, classes) = (rng.random_range(1..=4), rng.random_range(2..=4));
        let act = smooth_activation(rng);
        let mut reg = random_reg(rng);
        if reg.kind == RegKind::L1Activity {
            // sigmoid outputs are positive, identity ones are not
            reg.kind = RegKind::L2Activity;
        }
        let model = Mlp {
            hidden: random_layer(rng, "hidden", d, k, act),
            output: random_layer(rng, "output", k, classes, Activation::Identity),
        };
        let x = random_matrix(rng, n, d, -1.0, 1.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let mask = |rng: &mut ChaCha8Rng, cols: usize| {
            Array2::from_shape_fn((n, cols), |_| if rng.random_bool(0.7) { 1.0 / 0.7 } else { 0.0 })
        };
        let masks = DropoutMasks {
            input: rng.random_bool(0.5).then(|| mask(rng, d)),
            hidden: rng.random_bool(0.5).then(|| mask(rng, k)),
        };
        let (_, grads) = model.objective(&x, &labels, &reg, &masks).unwrap();
        let cost = |m: &Mlp| m.objective(&x, &labels, &reg, &masks).unwrap().0.total();
        let checks = [
            (flat(&grads.hidden.weights), numeric_grad(&model, |m| mat(&mut m.hidden.weights), cost)),
            (grads.hidden.bias.to_vec(), numeric_grad(&model, |m| vec1(&mut m.hidden.bias), cost)),
            (flat(&grads.output.weights), numeric_grad(&model, |m| mat(&mut m.output.weights), cost)),
            (grads.output.bias.to_vec(), numeric_grad(&model, |m| vec1(&mut m.output.bias), cost)),
        ];
        for (a, num) in &checks {
            worst = worst.max(rel_error(a, num));
        }
    }
    worst
}

fn ae_worst(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (n, k) = dims(rng);
        let d = rng.random_range(1..=4);
        let tied = rng.random_bool(0.5);
        let mut reg = random_reg(rng);
        if reg.kind == RegKind::L1Activity {
            reg.kind = RegKind::L2Activity;
        }
        let out_act = smooth_activation(rng);
        let mut model = Autoencoder {
            encoder: random_layer(rng, "encoder", d, k, Activation::Sigmoid),
            decoder: random_layer(rng, "decoder", k, d, out_act),
            tied,
        };
        model.sync_tied();
        let target = random_matrix(rng, n, d, -1.0, 1.0);
        let input = target.mapv(|v| if rng.random_bool(0.3) { 0.0 } else { v });
        let (_, grads) = model.objective(&input, &target, &reg).unwrap();
        let cost = |m: &Autoencoder| {
            let mut m = m.clone();
            m.sync_tied();
            m.objective(&input, &target, &reg).unwrap().0.total()
        };
        let mut checks = vec![
            (flat(&grads.encoder.weights), numeric_grad(&model, |m| mat(&mut m.encoder.weights), cost)),
            (grads.encoder.bias.to_vec(), numeric_grad(&model, |m| vec1(&mut m.encoder.bias), cost)),
            (grads.decoder.bias.to_vec(), numeric_grad(&model, |m| vec1(&mut m.decoder.bias), cost)),
        ];
        if !tied {
            checks.push((flat(&grads.decoder.weights), numeric_grad(&model, |m| mat(&mut m.decoder.weights), cost)));
        }
        for (a, num) in &checks {
            worst = worst.max(rel_error(a, num));
        }
    }
    worst
}

fn encoder_worst(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < INSTANCES {
        let (n, k) = dims(rng);
        let d = rng.random_range(1..=4);
        let objective = EncoderObjective {
            lambda: rng.random_range(0.01..1.0),
            include_diagonal: rng.random_bool(0.5),
            row_normalize: rng.random_bool(0.5),
            activity_term: true,
        };
        let layer = random_layer(rng, "encoder", d, k, Activation::Sigmoid);
        let x = random_matrix(rng, n, d, -1.0, 1.0);
        let hidden = layer.forward(&x).unwrap();
        let gap = (hidden.act.mean().unwrap() - 0.5).abs();
        if gap < 1e-3 {
            continue;
        }
        let grads = exact_direction(&layer, &x, &hidden, &objective).unwrap();
        let cost = |l: &DenseLayer| objective.cost_grad(&l.forward(&x).unwrap().act).unwrap().0;
        let checks = [
            (flat(&grads.weights), numeric_grad(&layer, |l| mat(&mut l.weights), cost)),
            (grads.bias.to_vec(), numeric_grad(&layer, |l| vec1(&mut l.bias), cost)),
        ];
        for (a, num) in &checks {
            worst = worst.max(rel_error(a, num));
        }
        checked += 1;
    }
    worst
}

#[test]
fn criterion_1_gradient_suite() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut results: Vec<(&str, f64)> = Vec::new();

    results.push((
        "mse",
        check_matrix_fn(
            &mut rng,
            |r| {
                let (n, k) = dims(r);
                random_matrix(r, n, k, -1.0, 1.0)
            },
            |p| {
                let target = Array2::from_shape_fn(p.raw_dim(), |(i, j)| ((3 * i + j) as f64).sin());
                mse_loss_grad(p, &target).unwrap()
            },
        ),
    ));
    results.push((
        "softmax_ce",
        check_matrix_fn(
            &mut rng,
            |r| {
                let (n, k) = dims(r);
                random_matrix(r, n, k + 1, -2.0, 2.0)
            },
            |z| {
                let labels: Vec<usize> = (0..z.nrows()).map(|i| (i * 7 + 3) % z.ncols()).collect();
                softmax_ce_loss_grad(z, &labels).unwrap()
            },
        ),
    ));
    for diag in [true, false] {
        results.push((
            if diag { "ovr_with_diagonal" } else { "ovr_without_diagonal" },
            check_matrix_fn(
                &mut rng,
                |r| {
                    let (n, k) = dims(r);
                    random_matrix(r, n, k, -1.0, 1.0)
                },
                |h| ovr_loss_grad(h, diag).unwrap(),
            ),
        ));
    }
    results.push((
        "activity_anchor",
        check_matrix_fn(
            &mut rng,
            |r| loop {
                let (n, k) = dims(r);
                let h = random_matrix(r, n, k, 0.0, 1.0);
                if (h.mean().unwrap() - 0.5).abs() > 1e-2 {
                    break h;
                }
            },
            |h| activity_target_loss_grad(h).unwrap(),
        ),
    ));
    for p in [1, 2] {
        results.push((
            if p == 1 { "l1_activity" } else { "l2_activity" },
            check_matrix_fn(
                &mut rng,
                |r| {
                    let (n, k) = dims(r);
                    signed_matrix(r, n, k)
                },
                |h| lp_activity_loss_grad(h, p).unwrap(),
            ),
        ));
    }
    for diag in [true, false] {
        let reg = RegConfig {
            kind: RegKind::Ovr,
            lambda: 0.7,
            include_diagonal: diag,
            row_normalize: true,
        };
        results.push((
            if diag { "row_normalized_ovr_with_diagonal" } else { "row_normalized_ovr" },
            check_matrix_fn(
                &mut rng,
                |r| {
                    let (n, k) = dims(r);
                    signed_matrix(r, n, k)
                },
                |h| {
                    let p = reg.penalty(h).unwrap();
                    (p.loss, p.grad)
                },
            ),
        ));
    }
    results.push(("mlp_objective", mlp_worst(&mut rng)));
    results.push(("autoencoder_objective", ae_worst(&mut rng)));
    results.push(("ovr_encoder_objective", encoder_worst(&mut rng)));

    let elapsed = start.elapsed().as_secs_f64();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = results
        .iter()
        .map(|(name, e)| format!("{name}={e:.1e}"))
        .collect::<Vec<_>>()
        .join(" ");
    report(
        1,
        "gradient suite",
        worst < GRAD_TOL && elapsed < 60.0,
        &format!("{INSTANCES} instances each, step {FD_STEP:e}, tol {GRAD_TOL:e}, {elapsed:.1}s; {detail}"),
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_2_local_rule_is_half_the_exact_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in [2, 5, 16] {
        for _ in 0..30 {
            let (d, k) = (rng.random_range(1..=8), rng.random_range(1..=8));
            let lambda = rng.random_range(1e-3..1.0);
            let layer = random_layer(&mut rng, "encoder", d, k, Activation::Identity);
            let x = random_matrix(&mut rng, n, d, -2.0, 2.0);
            let hidden = layer.forward(&x).unwrap();
            let objective = EncoderObjective {
                lambda,
                include_diagonal: false,
                row_normalize: false,
                activity_term: false,
            };
            let exact = exact_direction(&layer, &x, &hidden, &objective).unwrap().weights;
            let local = local_ovr_direction(&x, &hidden.act, lambda).unwrap();
            let dev = (&local - &(exact * 0.5)).iter().map(|v| v.abs()).fold(0.0, f64::max);
            worst = worst.max(dev);
            cases += 1;
        }
    }
    report(
        2,
        "local rule = 1/2 exact gradient",
        worst < 1e-10,
        &format!("{cases} batches, n in {{2,5,16}}, max abs deviation {worst:.2e} (tol 1e-10)"),
    );
}

// ---------------------------------------------------------------------------
// Training experiments on the sphere dataset

fn final_row(cfg: &ExperimentConfig, data: &PreparedData) -> RunRecord {
    let outcome = execute(cfg, data).unwrap();
    outcome
        .records
        .into_iter()
        .find(|r| r.status == RunStatus::Final)
        .expect("final row")
}

/// Ranks with ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; v.len()];
    for i in 0..v.len() {
        let below = v.iter().filter(|&&w| w < v[i]).count() as f64;
        let equal = v.iter().filter(|&&w| w == v[i]).count() as f64;
        r[i] = below + (equal + 1.0) / 2.0;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_oracle_known_values() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.5, 0.7, 0.9]), 1.0);
    assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), -1.0);
    // ranks (1, 2, 3, 4) against (1, 2.5, 2.5, 4)
    let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 2.0, 3.0]);
    assert!((rho - 4.5 / (5.0f64 * 4.5).sqrt()).abs() < 1e-12);
}

const TREND_SEEDS: u64 = 6;

#[test]
fn criterion_3_sparsity_grows_with_cluster_count() {
    let start = std::time::Instant::now();
    // (m_sectors, n_cuts) giving 8, 16, 40 and 80 clusters
    let layouts = [(4, 1), (8, 1), (8, 4), (16, 4)];
    let hidden_sizes = [8, 16, 32, 64];
    let mut mean_sparsity: HashMap<(usize, usize), f64> = HashMap::new();
    for &(m, n) in &layouts {
        for seed in 0..TREND_SEEDS {
            let mut cfg = ExperimentConfig::sphere(ModelKind::Mlp, m, n, 10, 5000);
            cfg.activation = Activation::Relu;
            cfg.epochs = 100;
            cfg.optimizer.lr = 0.01;
            cfg.seed = seed;
            let data = prepare_data(&cfg).unwrap();
            for &h in &hidden_sizes {
                cfg.hidden_units = h;
                let sp = final_row(&cfg, &data).sparsity.unwrap();
                *mean_sparsity.entry((m * (n + 1), h)).or_default() += sp / TREND_SEEDS as f64;
            }
        }
    }
    let clusters: Vec<f64> = layouts.iter().map(|&(m, n)| (m * (n + 1)) as f64).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for &h in &hidden_sizes {
        let sp: Vec<f64> = layouts.iter().map(|&(m, n)| mean_sparsity[&(m * (n + 1), h)]).collect();
        let rho = spearman(&clusters, &sp);
        pass &= rho >= 0.8;
        parts.push(format!(
            "hidden {h}: rho {rho:.2} [{}]",
            sp.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        3,
        "sparsity vs cluster count",
        pass && elapsed < 600.0,
        &format!(
            "clusters 8/16/40/80, {TREND_SEEDS} seeds, rho >= 0.8, {elapsed:.0}s; {}",
            parts.join("; ")
        ),
    );
}

#[test]
fn criterion_4_lambda_sweep_trend() {
    let start = std::time::Instant::now();
    let lambdas = [0.0, 1e-5, 1e-4, 1e-3, 1e-2];
    let seeds = 3;
    let mut sparsity = vec![0.0; lambdas.len()];
    let mut accuracy = vec![0.0; lambdas.len()];
    for seed in 0..seeds {
        let mut cfg = ExperimentConfig::sphere(ModelKind::Mlp, 8, 4, 10, 5000);
        cfg.activation = Activation::Relu;
        cfg.hidden_units = 64;
        cfg.epochs = 100;
        cfg.optimizer.lr = 0.01;
        cfg.seed = seed;
        let data = prepare_data(&cfg).unwrap();
        for (i, &lambda) in lambdas.iter().enumerate() {
            cfg.reg = RegConfig {
                kind: RegKind::Ovr,
                lambda,
                include_diagonal: false,
                row_normalize: true,
            };
            let row = final_row(&cfg, &data);
            sparsity[i] += row.sparsity.unwrap() / seeds as f64;
            accuracy[i] += row.probe_accuracy.unwrap() / seeds as f64;
        }
    }
    let monotone = sparsity.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let peak = (0..lambdas.len())
        .max_by(|&a, &b| accuracy[a].total_cmp(&accuracy[b]))
        .unwrap();
    let interior = peak != 0 && peak != lambdas.len() - 1;
    let elapsed = start.elapsed().as_secs_f64();
    let table = lambdas
        .iter()
        .zip(sparsity.iter().zip(&accuracy))
        .map(|(l, (s, a))| format!("{l:e}: sparsity {s:.3} acc {a:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    report(
        4,
        "lambda sweep trend",
        monotone && interior && elapsed < 600.0,
        &format!(
            "40 clusters, {seeds} seeds, monotone(-0.02) {monotone}, peak at lambda {:e} {}, {elapsed:.0}s; {table}",
            lambdas[peak],
            if interior { "(interior)" } else { "(endpoint)" }
        ),
    );
}

fn encoder_config(seed: u64, lambda: f64, batch_size: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::sphere(ModelKind::OvrEncoder, 8, 4, 10, 5000);
    cfg.activation = Activation::Sigmoid;
    cfg.hidden_units = 64;
    cfg.epochs = 30;
    cfg.seed = seed;
    cfg.reg = RegConfig::ovr(lambda);
    cfg.optimizer.lr = 0.01;
    cfg.optimizer.batch_size = batch_size;
    cfg.encoder.update_rule = UpdateRule::ExactGradient;
    cfg.encoder.row_normalize = true;
    cfg
}

#[test]
fn criterion_5_activity_term_prevents_collapse() {
    let start = std::time::Instant::now();
    let mut finals = Vec::new();
    for activity_term in [false, true] {
        let mut cfg = encoder_config(0, 1e-5, 128);
        cfg.encoder.activity_term = activity_term;
        let data = prepare_data(&cfg).unwrap();
        let rows = execute(&cfg, &data).unwrap().records;
        let last_epoch = rows.iter().rfind(|r| r.status == RunStatus::Epoch).unwrap();
        finals.push(last_epoch.mean_activation.unwrap());
    }
    let (off, on) = (finals[0], finals[1]);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        5,
        "collapse guard",
        off < 0.05 && (0.3..=0.7).contains(&on) && elapsed < 300.0,
        &format!(
            "sigmoid, 30 epochs, seed 0: mean activation without L {off:.4} (< 0.05), with L {on:.4} (in [0.3, 0.7]), {elapsed:.0}s"
        ),
    );
}

#[test]
fn criterion_6_probe_ordering() {
    let start = std::time::Instant::now();
    let seeds = 3;
    let (mut logistic, mut kmeans, mut ovr) = (0.0, 0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 0..seeds {
        let mut enc = encoder_config(seed, 1e-3, 64);
        enc.probe.lr = 0.05;
        let data = prepare_data(&enc).unwrap();
        let mut km = enc.clone();
        km.model = ModelKind::Kmeans;
        let mut lo = enc.clone();
        lo.model = ModelKind::LogisticOnly;
        let accs = [&lo, &km, &enc].map(|c| final_row(c, &data).probe_accuracy.unwrap());
        per_seed.push(format!("seed {seed}: {:.3}/{:.3}/{:.3}", accs[0], accs[1], accs[2]));
        logistic += accs[0] / seeds as f64;
        kmeans += accs[1] / seeds as f64;
        ovr += accs[2] / seeds as f64;
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        6,
        "probe ordering",
        logistic < kmeans && kmeans <= ovr && elapsed < 900.0,
        &format!(
            "40 clusters, {seeds} seeds, mean logistic {logistic:.4} < kmeans {kmeans:.4} <= ovr_encoder {ovr:.4}, {elapsed:.0}s; {}",
            per_seed.join("; ")
        ),
    );
}

// ---------------------------------------------------------------------------

#[test]
#[ignore = "needs CIFAR-10 in OVR_CIFAR_DIR and hours of compute"]
fn criterion_7_cifar10_reproduction() {
    let dir = std::env::var("OVR_CIFAR_DIR").expect("set OVR_CIFAR_DIR to cifar-10-batches-bin");
    let epochs: usize = std::env::var("OVR_CIFAR_EPOCHS")
        .map(|v| v.parse().expect("OVR_CIFAR_EPOCHS"))
        .unwrap_or(30);
    let base = |model: ModelKind| {
        let mut cfg = ExperimentConfig::new(
            model,
            DatasetConfig::Cifar10 {
                path: dir.clone().into(),
                pca_dims: 256,
                train_limit: None,
            },
        );
        cfg.hidden_units = 8192;
        cfg.activation = Activation::Sigmoid;
        cfg.epochs = epochs;
        cfg.optimizer.lr = 1e-3;
        cfg.optimizer.batch_size = 128;
        cfg
    };
    let mut enc = base(ModelKind::OvrEncoder);
    enc.reg = RegConfig::ovr(1e-4);
    let mut dae = base(ModelKind::DenoisingAutoencoder);
    dae.dropout.input = 0.3;
    let lo = base(ModelKind::LogisticOnly);
    let data = prepare_data(&enc).unwrap();
    let acc = |c: &ExperimentConfig| 100.0 * final_row(c, &data).probe_accuracy.unwrap();
    let (a_enc, a_dae, a_lo) = (acc(&enc), acc(&dae), acc(&lo));
    report(
        7,
        "CIFAR-10 reproduction",
        (a_enc - 57.65).abs() <= 3.0 && (a_dae - 57.79).abs() <= 3.0 && (a_lo - 39.78).abs() <= 2.0,
        &format!(
            "ovr_encoder {a_enc:.2} (57.65 +/- 3), denoising AE {a_dae:.2} (57.79 +/- 3), logistic {a_lo:.2} (39.78 +/- 2)"
        ),
    );
}

// ---------------------------------------------------------------------------

fn cifar_error(bytes: &[u8], name: &str) -> (Option<usize>, String) {
    match parse_cifar_batch(bytes, Path::new(name)) {
        Err(e @ OvrError::Format { .. }) => {
            let text = e.to_string();
            match e {
                OvrError::Format { record, .. } => (record, text),
                _ => unreachable!(),
            }
        }
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn criterion_8_format_contracts() {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let record = CIFAR_IMAGE_BYTES + 1;
    let mut bytes = vec![0u8; CIFAR_RECORDS_PER_FILE * record];
    for i in 0..CIFAR_RECORDS_PER_FILE {
        bytes[i * record] = (i % 10) as u8;
        bytes[i * record + 1] = 255;
    }
    let (x, y) = parse_cifar_batch(&bytes, Path::new("data_batch_1.bin")).unwrap();
    checks.push((
        "cifar well-formed batch",
        x.dim() == (10_000, 3072) && y[9999] == 9 && x[[7, 0]] == 1.0 && x[[7, 1]] == 0.0,
    ));

    let (rec, text) = cifar_error(&bytes[..bytes.len() - 5], "data_batch_3.bin");
    checks.push((
        "cifar truncated file names record 9999",
        rec == Some(9999) && text.contains("data_batch_3.bin (record 9999)"),
    ));
    let (rec, text) = cifar_error(&bytes[..record * 42 + 100], "test_batch.bin");
    checks.push((
        "cifar short file names record 42",
        rec == Some(42) && text.contains("test_batch.bin (record 42)"),
    ));
    let mut long = bytes.clone();
    long.push(0);
    let (rec, text) = cifar_error(&long, "data_batch_5.bin");
    checks.push((
        "cifar trailing byte rejected",
        rec == Some(10_000) && text.contains("trailing data after record 9999"),
    ));
    let mut bad = bytes.clone();
    bad[1234 * record] = 10;
    let (rec, text) = cifar_error(&bad, "data_batch_2.bin");
    checks.push((
        "cifar bad label names record 1234",
        rec == Some(1234) && text.contains("data_batch_2.bin (record 1234)") && text.contains("label byte 10"),
    ));

    let dir = tempfile::tempdir().unwrap();
    let specials = [
        0.0,
        -0.0,
        f64::MIN_POSITIVE,
        5e-324,
        f64::MAX,
        -1.0 / 3.0,
        std::f64::consts::PI,
        1e-300,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = Array2::from_shape_fn((4, 2), |(i, j)| specials[i * 2 + j]);
    let layer = DenseLayer::new("enc", w, Array1::from(vec![1.5, -2.25, 7e-12, 0.1]), Activation::Sigmoid).unwrap();
    let mut ckpt = Checkpoint::default().with_meta("model", "ovr_encoder").with_meta("seed", 3);
    ckpt.push_layer("encoder", &layer);
    ckpt.arrays
        .push(NamedArray::matrix("noise", &random_matrix(&mut rng, 17, 5, -1e6, 1e6)));
    let path = dir.path().join("a.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let bits = |c: &Checkpoint| -> Vec<u64> { c.arrays.iter().flat_map(|a| a.data.iter().map(|v| v.to_bits())).collect() };
    checks.push((
        "checkpoint round trip is bit-exact",
        bits(&back) == bits(&ckpt)
            && back.meta == ckpt.meta
            && back.layer("encoder").unwrap() == layer
            && back.to_bytes() == std::fs::read(&path).unwrap(),
    ));

    let csv_path = dir.path().join("results.csv");
    write_records(&csv_path, &common::golden_records()).unwrap();
    checks.push((
        "csv golden fixture byte-for-byte",
        std::fs::read(&csv_path).unwrap() == std::fs::read(common::fixture("results_golden.csv")).unwrap(),
    ));
    checks.push((
        "csv golden fixture parses back",
        read_records(&common::fixture("results_golden.csv")).unwrap() == common::golden_records(),
    ));
    let img = tile_images(&common::golden_feature_images(), 2).unwrap();
    checks.push((
        "ppm golden fixture byte-for-byte",
        ppm_bytes(&img) == std::fs::read(common::fixture("features_3x2.ppm")).unwrap(),
    ));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        8,
        "format contracts",
        failed.is_empty(),
        &format!("{} checks, failed: {:?}", checks.len(), failed),
    );
}

// ---------------------------------------------------------------------------

/// `sum_i sum_j h_i . h_j` by explicit loops.
fn brute_force_ovr(h: &Array2<f64>, include_diagonal: bool) -> f64 {
    let (n, k) = h.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j && !include_diagonal {
                continue;
            }
            for c in 0..k {
                total += h[[i, c]] * h[[j, c]];
            }
        }
    }
    total
}

#[test]
fn criterion_9_ovr_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..300 {
        let (n, k) = (rng.random_range(1..=6), rng.random_range(1..=5));
        let h = random_matrix(&mut rng, n, k, -1.0, 1.0);
        for diag in [true, false] {
            let (loss, _) = ovr_loss_grad(&h, diag).unwrap();
            let expected = brute_force_ovr(&h, diag);
            worst = worst.max((loss - expected).abs());
            cases += 1;
        }
    }
    report(
        9,
        "OVR loss vs brute force",
        cases >= 500 && worst <= 1e-12,
        &format!("{cases} cases, 1<=n<=6, 1<=K<=5, max abs deviation {worst:.2e} (tol 1e-12)"),
    );
}
