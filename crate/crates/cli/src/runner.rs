//! Training and evaluation of a single configured run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use ovr_core::datasets::{
    fit_pca, generate_sphere_dataset, load_cifar10, pca_transform, LabeledDataset, PcaModel, SpherePartitionSpec,
};
use ovr_core::evaluation::{default_tau, kmeans_encode, kmeans_fit, sparsity, train_logistic_probe, KMeansEncoding};
use ovr_core::network::{
    train_autoencoder, train_mlp, Activation, Autoencoder, Checkpoint, EpochStats, Mlp, NamedArray,
};
use ovr_core::ovr_encoder::train_ovr_encoder;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DatasetConfig, ExperimentConfig, ModelKind};
use crate::error::{CliError, Result};
use crate::record::{append_records, finite, RunRecord, RunStatus};

/// Train/validation split, plus the PCA model when inputs were reduced.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub pca: Option<PcaModel>,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    match &cfg.dataset {
        DatasetConfig::Sphere {
            m_sectors,
            n_cuts,
            num_classes,
            num_points,
            seed,
        } => {
            let spec = SpherePartitionSpec {
                m_sectors: *m_sectors,
                n_cuts: *n_cuts,
                num_classes: *num_classes,
                num_points: *num_points,
                seed: seed.unwrap_or(cfg.seed),
            };
            let (train, val) = generate_sphere_dataset(&spec)?.split(cfg.val_fraction, cfg.seed)?;
            Ok(PreparedData { train, val, pca: None })
        }
        DatasetConfig::Cifar10 {
            path,
            pca_dims,
            train_limit,
        } => {
            cfg.check_paths()?;
            let (mut train, test) = load_cifar10(path)?;
            if let Some(limit) = train_limit.filter(|&l| l < train.num_samples()) {
                train = train.subset(&(0..limit).collect::<Vec<_>>())?;
            }
            let pca = fit_pca(&train.x, *pca_dims)?;
            let note = format!("cifar10 pca{pca_dims}");
            Ok(PreparedData {
                train: train.with_features(pca_transform(&pca, &train.x)?, &note)?,
                val: test.with_features(pca_transform(&pca, &test.x)?, &note)?,
                pca: Some(pca),
            })
        }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub checkpoint: Option<Checkpoint>,
}

struct Evaluation {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    sparsity: Option<f64>,
    mean_activation: Option<f64>,
    probe_accuracy: f64,
}

struct RowFactory<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
}

impl RowFactory<'_> {
    fn row(&self, epoch: usize, status: RunStatus) -> RunRecord {
        let hidden = if self.cfg.model.has_hidden_layer() {
            self.cfg.hidden_units
        } else {
            0
        };
        RunRecord {
            run_id: self.hash[..12].to_string(),
            model: self.cfg.model,
            hidden,
            lambda: self.cfg.effective_lambda(),
            activation: self.cfg.activation,
            seed: self.cfg.seed,
            epoch,
            train_loss: None,
            val_loss: None,
            sparsity: None,
            mean_activation: None,
            probe_accuracy: None,
            wall_time_seconds: 0.0,
            status,
            message: String::new(),
            config_hash: self.hash.clone(),
            version: ovr_core::VERSION.to_string(),
        }
    }

    fn history_rows(&self, history: &[EpochStats]) -> Vec<RunRecord> {
        history
            .iter()
            .map(|s| RunRecord {
                train_loss: finite(s.train_loss),
                val_loss: finite(s.val_loss),
                ..self.row(s.epoch, RunStatus::Epoch)
            })
            .collect()
    }
}

/// The row recorded for a run that raised `err`.
pub fn failure_record(cfg: &ExperimentConfig, err: &CliError, wall_time_seconds: f64) -> RunRecord {
    let rows = RowFactory {
        cfg,
        hash: cfg.config_hash(),
    };
    RunRecord {
        message: err.to_string(),
        wall_time_seconds,
        ..rows.row(0, RunStatus::Failed)
    }
}

fn probe(cfg: &ExperimentConfig, data: &PreparedData, train_reps: &Array2<f64>, val_reps: &Array2<f64>) -> Result<f64> {
    let outcome = train_logistic_probe(
        train_reps,
        &data.train.y,
        val_reps,
        &data.val.y,
        data.train.class_count,
        &cfg.probe_config(),
    )?;
    Ok(outcome.accuracy)
}

fn hidden_stats(h: &Array2<f64>, tau: f64) -> Result<(Option<f64>, Option<f64>)> {
    let report = sparsity(h, tau)?;
    Ok((Some(report.mean_sparsity), Some(report.mean_activation)))
}

fn checkpoint_for(cfg: &ExperimentConfig, hash: &str) -> Checkpoint {
    Checkpoint::default()
        .with_meta("model", cfg.model)
        .with_meta("config_hash", hash)
        .with_meta("version", ovr_core::VERSION)
}

/// Trains and evaluates `cfg` on already prepared data. Nothing is written.
pub fn execute(cfg: &ExperimentConfig, data: &PreparedData) -> Result<RunOutcome> {
    cfg.validate().map_err(CliError::Invalid)?;
    let start = Instant::now();
    let hash = cfg.config_hash();
    let rows = RowFactory { cfg, hash: hash.clone() };
    let mut ckpt = checkpoint_for(cfg, &hash);
    let (train, val) = (&data.train, &data.val);
    let classes = train.class_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (mut records, eval) = match cfg.model {
        ModelKind::Mlp => {
            let init = Mlp::new(train.dim(), cfg.hidden_units, classes, cfg.activation, &mut rng);
            let trained = train_mlp(init, &cfg.train_config(), train, val)?;
            let best = trained.history[trained.best_epoch];
            let h = trained.model.hidden_forward(&val.x)?.act;
            let (sp, mean) = hidden_stats(&h, default_tau(cfg.activation))?;
            ckpt.push_layer("hidden", &trained.model.hidden);
            ckpt.push_layer("output", &trained.model.output);
            let eval = Evaluation {
                epoch: trained.best_epoch,
                train_loss: best.train_loss,
                val_loss: best.val_loss,
                sparsity: sp,
                mean_activation: mean,
                probe_accuracy: trained.model.accuracy(&val.x, &val.y)?,
            };
            (rows.history_rows(&trained.history), eval)
        }
        ModelKind::Autoencoder | ModelKind::DenoisingAutoencoder => {
            let mut tc = cfg.train_config();
            if cfg.model == ModelKind::Autoencoder {
                tc.input_drop = 0.0;
            }
            tc.hidden_drop = 0.0;
            let init = Autoencoder::new(
                train.dim(),
                cfg.hidden_units,
                cfg.activation,
                Activation::Identity,
                false,
                &mut rng,
            );
            let trained = train_autoencoder(init, &tc, train, val)?;
            let best = trained.history[trained.best_epoch];
            let train_h = trained.model.encode(&train.x)?.act;
            let val_h = trained.model.encode(&val.x)?.act;
            let (sp, mean) = hidden_stats(&val_h, default_tau(cfg.activation))?;
            ckpt.push_layer("encoder", &trained.model.encoder);
            ckpt.push_layer("decoder", &trained.model.decoder);
            let eval = Evaluation {
                epoch: trained.best_epoch,
                train_loss: best.train_loss,
                val_loss: best.val_loss,
                sparsity: sp,
                mean_activation: mean,
                probe_accuracy: probe(cfg, data, &train_h, &val_h)?,
            };
            (rows.history_rows(&trained.history), eval)
        }
        ModelKind::OvrEncoder => {
            let trained = train_ovr_encoder(&cfg.encoder_config(), train)?;
            let history: Vec<RunRecord> = trained
                .history
                .iter()
                .map(|e| RunRecord {
                    train_loss: finite(e.cost),
                    sparsity: finite(e.sparsity),
                    mean_activation: finite(e.mean_activation),
                    ..rows.row(e.epoch, RunStatus::Epoch)
                })
                .collect();
            let train_h = trained.encoder.encode(&train.x)?;
            let val_h = trained.encoder.encode(&val.x)?;
            let (sp, mean) = hidden_stats(&val_h, default_tau(cfg.activation))?;
            ckpt.push_layer("encoder", &trained.encoder.layer);
            let last = trained.history.last().expect("at least one epoch");
            let eval = Evaluation {
                epoch: last.epoch,
                train_loss: last.cost,
                val_loss: f64::NAN,
                sparsity: sp,
                mean_activation: mean,
                probe_accuracy: probe(cfg, data, &train_h, &val_h)?,
            };
            (history, eval)
        }
        ModelKind::Kmeans => {
            let model = kmeans_fit(&train.x, cfg.hidden_units, cfg.kmeans.epochs, cfg.seed)?;
            let train_f = kmeans_encode(&model, &train.x, cfg.kmeans.encoding)?;
            let val_f = kmeans_encode(&model, &val.x, cfg.kmeans.encoding)?;
            let (sp, mean) = hidden_stats(&val_f, default_tau(Activation::Relu))?;
            ckpt.arrays.push(NamedArray::matrix("centroids", &model.centroids));
            ckpt.meta.insert("kmeans.k".into(), cfg.hidden_units.to_string());
            ckpt.meta.insert("kmeans.epochs".into(), cfg.kmeans.epochs.to_string());
            ckpt.meta.insert("kmeans.encoding".into(), encoding_name(cfg.kmeans.encoding).into());
            let eval = Evaluation {
                epoch: cfg.kmeans.epochs - 1,
                train_loss: f64::NAN,
                val_loss: f64::NAN,
                sparsity: sp,
                mean_activation: mean,
                probe_accuracy: probe(cfg, data, &train_f, &val_f)?,
            };
            (Vec::new(), eval)
        }
        ModelKind::LogisticOnly => {
            let eval = Evaluation {
                epoch: cfg.probe.epochs - 1,
                train_loss: f64::NAN,
                val_loss: f64::NAN,
                sparsity: None,
                mean_activation: None,
                probe_accuracy: probe(cfg, data, &train.x, &val.x)?,
            };
            (Vec::new(), eval)
        }
    };

    records.push(RunRecord {
        train_loss: finite(eval.train_loss),
        val_loss: finite(eval.val_loss),
        sparsity: eval.sparsity,
        mean_activation: eval.mean_activation,
        probe_accuracy: finite(eval.probe_accuracy),
        ..rows.row(eval.epoch, RunStatus::Final)
    });
    let wall = start.elapsed().as_secs_f64();
    for r in &mut records {
        r.wall_time_seconds = wall;
    }
    let checkpoint = (cfg.model != ModelKind::LogisticOnly).then_some(ckpt);
    Ok(RunOutcome { records, checkpoint })
}

/// Where the run's model checkpoint goes: `<dir>/checkpoints/<run_id>.ckpt`.
pub fn checkpoint_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .dir
        .join("checkpoints")
        .join(format!("{}.ckpt", &cfg.config_hash()[..12]))
}

/// Path of the PCA model saved next to a run's checkpoint.
pub fn pca_path(cfg: &ExperimentConfig) -> PathBuf {
    checkpoint_path(cfg).with_extension("pca.ckpt")
}

pub(crate) fn save_artifacts(cfg: &ExperimentConfig, outcome: &RunOutcome, pca: Option<&PcaModel>) -> Result<()> {
    if !cfg.output.checkpoints {
        return Ok(());
    }
    let path = checkpoint_path(cfg);
    let dir = path.parent().expect("checkpoint path has a parent");
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if let Some(ckpt) = &outcome.checkpoint {
        ckpt.save(&path)?;
    }
    if let Some(pca) = pca {
        Checkpoint::from_pca(pca).save(&pca_path(cfg))?;
    }
    Ok(())
}

/// Prepares the dataset, trains, saves checkpoints and appends the run's
/// rows to the configured CSV file.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let data = prepare_data(cfg)?;
    let outcome = execute(cfg, &data)?;
    save_artifacts(cfg, &outcome, data.pca.as_ref())?;
    append_records(&cfg.output.csv_path(), &outcome.records)?;
    Ok(outcome.records)
}

fn encoding_name(e: KMeansEncoding) -> &'static str {
    match e {
        KMeansEncoding::Triangle => "triangle",
        KMeansEncoding::Hard => "hard",
    }
}

/// Representations of `x` under a saved checkpoint: the first of
/// `encoder`/`hidden` layers, or k-means features in the encoding recorded
/// with the centroids (triangle when absent).
pub fn checkpoint_features(ckpt: &Checkpoint, x: &Array2<f64>) -> Result<Array2<f64>> {
    for prefix in ["encoder", "hidden"] {
        if ckpt.array(&format!("{prefix}.weights")).is_some() {
            return Ok(ckpt.layer(prefix)?.forward(x)?.act);
        }
    }
    if ckpt.array("centroids").is_some() {
        let model = ovr_core::evaluation::KMeansModel {
            centroids: ckpt.matrix("centroids")?,
            counts: Vec::new(),
        };
        let encoding = match ckpt.meta.get("kmeans.encoding").map(String::as_str) {
            Some("hard") => KMeansEncoding::Hard,
            _ => KMeansEncoding::Triangle,
        };
        return Ok(kmeans_encode(&model, x, encoding)?);
    }
    Err(CliError::Invalid("checkpoint holds no encoder, hidden layer or centroids".into()))
}

/// Loads a checkpoint and evaluates a fresh probe on its features.
pub fn probe_checkpoint(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<(f64, Option<f64>)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = prepare_data(cfg)?;
    let train_f = checkpoint_features(&ckpt, &data.train.x)?;
    let val_f = checkpoint_features(&ckpt, &data.val.x)?;
    let tau = ckpt
        .meta
        .get("encoder.activation")
        .or_else(|| ckpt.meta.get("hidden.activation"))
        .and_then(|a| a.parse::<Activation>().ok())
        .map_or(default_tau(Activation::Relu), default_tau);
    let sp = sparsity(&val_f, tau)?.mean_sparsity;
    Ok((probe(cfg, &data, &train_f, &val_f)?, Some(sp)))
}
