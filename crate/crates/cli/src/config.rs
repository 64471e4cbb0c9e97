//! Experiment configuration files.
//!
//! A config is a TOML document. Top-level keys select the model and its
//! size; tables hold the dataset, regularizer, dropout, optimizer, encoder,
//! k-means, probe and output settings. Every table except `[dataset]` may be
//! omitted. Unknown keys are rejected.
//!
//! ```toml
//! model = "ovr_encoder"          # mlp | autoencoder | denoising_autoencoder
//!                                # | ovr_encoder | kmeans | logistic_only
//! hidden_units = 64
//! activation = "sigmoid"         # sigmoid | relu | identity
//! epochs = 30
//! seed = 0
//! val_fraction = 0.2             # sphere only; CIFAR-10 uses its test batch
//!
//! [dataset]
//! kind = "sphere"                # or: kind = "cifar10", path = "...", pca_dims = 256
//! m_sectors = 8
//! n_cuts = 4
//! num_classes = 10
//! num_points = 5000
//!
//! [reg]
//! kind = "ovr"                   # none | ovr | l1_activity | l2_activity
//! lambda = 1e-4
//!
//! [grid]                         # sweeps only: cartesian product of lists
//! lambda = [0.0, 1e-5, 1e-4]
//! seed = [0, 1, 2]
//! ```

use std::path::{Path, PathBuf};

use ovr_core::evaluation::{KMeansEncoding, ProbeConfig};
use ovr_core::network::{Activation, AdamConfig, PlateauScheduler, TrainConfig};
use ovr_core::ovr_encoder::{OvrEncoderConfig, StepRule, UpdateRule};
use ovr_core::regularizers::RegConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Autoencoder,
    DenoisingAutoencoder,
    OvrEncoder,
    Kmeans,
    LogisticOnly,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Autoencoder => "autoencoder",
            ModelKind::DenoisingAutoencoder => "denoising_autoencoder",
            ModelKind::OvrEncoder => "ovr_encoder",
            ModelKind::Kmeans => "kmeans",
            ModelKind::LogisticOnly => "logistic_only",
        }
    }

    pub fn has_hidden_layer(self) -> bool {
        self != ModelKind::LogisticOnly
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_pca_dims() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Sphere {
        m_sectors: usize,
        n_cuts: usize,
        num_classes: usize,
        num_points: usize,
        /// Defaults to the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Cifar10 {
        /// Directory holding `data_batch_1.bin` .. `data_batch_5.bin` and `test_batch.bin`.
        path: PathBuf,
        #[serde(default = "default_pca_dims")]
        pca_dims: usize,
        /// Use only the first `train_limit` training images.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_limit: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutConfig {
    /// MLP: inverted input dropout. Denoising autoencoder: corruption ratio.
    pub input: f64,
    /// MLP only.
    pub hidden: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Halve the learning rate on training-loss plateaus.
    pub plateau: bool,
    pub patience: usize,
    pub factor: f64,
    pub min_improvement: f64,
    /// Keep the epoch with the lowest validation loss (MLP and autoencoders).
    pub select_best: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let plateau = PlateauScheduler::default();
        Self {
            lr: 1e-3,
            batch_size: 128,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            plateau: true,
            patience: plateau.patience,
            factor: plateau.factor,
            min_improvement: plateau.min_improvement,
            select_best: true,
        }
    }
}

impl OptimizerConfig {
    fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// OVR-encoder settings. The penalty strength comes from `reg.lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub update_rule: UpdateRule,
    pub step_rule: StepRule,
    pub activity_term: bool,
    pub row_normalize: bool,
    pub include_diagonal: bool,
    pub use_bias: bool,
}

impl Default for EncoderSection {
    fn default() -> Self {
        let d = OvrEncoderConfig::default();
        Self {
            update_rule: d.update_rule,
            step_rule: d.step_rule,
            activity_term: d.activity_term,
            row_normalize: d.row_normalize,
            include_diagonal: d.include_diagonal,
            use_bias: d.use_bias,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansSection {
    /// Passes over the training set.
    pub epochs: usize,
    pub encoding: KMeansEncoding,
}

impl Default for KMeansSection {
    fn default() -> Self {
        Self {
            epochs: 5,
            encoding: KMeansEncoding::Triangle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let d = ProbeConfig::default();
        Self {
            epochs: d.epochs,
            lr: d.lr,
            batch_size: d.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File name inside `dir`.
    pub csv: String,
    pub checkpoints: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            csv: "results.csv".into(),
            checkpoints: true,
        }
    }
}

impl OutputConfig {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }
}

/// Lists of values crossed into one run per combination.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub model: Vec<ModelKind>,
    pub hidden_units: Vec<usize>,
    pub lambda: Vec<f64>,
    pub activation: Vec<Activation>,
    pub seed: Vec<u64>,
    pub input_dropout: Vec<f64>,
}

fn default_hidden() -> usize {
    64
}
fn default_activation() -> Activation {
    Activation::Sigmoid
}
fn default_epochs() -> usize {
    75
}
fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub reg: RegConfig,
    #[serde(default)]
    pub dropout: DropoutConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub kmeans: KMeansSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the model and dataset.
    pub fn new(model: ModelKind, dataset: DatasetConfig) -> Self {
        Self {
            model,
            hidden_units: default_hidden(),
            activation: default_activation(),
            epochs: default_epochs(),
            seed: 0,
            val_fraction: default_val_fraction(),
            dataset,
            reg: RegConfig::default(),
            dropout: DropoutConfig::default(),
            optimizer: OptimizerConfig::default(),
            encoder: EncoderSection::default(),
            kmeans: KMeansSection::default(),
            probe: ProbeSection::default(),
            output: OutputConfig::default(),
            grid: None,
        }
    }

    pub fn sphere(model: ModelKind, m_sectors: usize, n_cuts: usize, num_classes: usize, num_points: usize) -> Self {
        Self::new(
            model,
            DatasetConfig::Sphere {
                m_sectors,
                n_cuts,
                num_classes,
                num_points,
                seed: None,
            },
        )
    }

    /// Parses and validates a TOML document. Errors name the line and key.
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.model.has_hidden_layer() && self.hidden_units == 0 {
            return Err("hidden_units must be positive".into());
        }
        if self.epochs == 0 {
            return Err("epochs must be positive".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(format!("val_fraction {} must lie in (0, 1)", self.val_fraction));
        }
        for (name, p) in [("dropout.input", self.dropout.input), ("dropout.hidden", self.dropout.hidden)] {
            if !(0.0..1.0).contains(&p) {
                return Err(format!("{name} = {p} must lie in [0, 1)"));
            }
        }
        if self.model == ModelKind::DenoisingAutoencoder && self.dropout.input == 0.0 {
            return Err("denoising_autoencoder needs dropout.input > 0".into());
        }
        if !(self.optimizer.lr > 0.0) || self.optimizer.batch_size == 0 {
            return Err("optimizer.lr and optimizer.batch_size must be positive".into());
        }
        if !(self.probe.lr > 0.0) || self.probe.epochs == 0 || self.probe.batch_size == 0 {
            return Err("probe.lr, probe.epochs and probe.batch_size must be positive".into());
        }
        if self.model == ModelKind::Kmeans && self.kmeans.epochs == 0 {
            return Err("kmeans.epochs must be positive".into());
        }
        self.reg.validate().map_err(|e| e.to_string())?;
        if self.model == ModelKind::OvrEncoder {
            self.encoder_config().validate().map_err(|e| e.to_string())?;
        }
        match &self.dataset {
            DatasetConfig::Sphere {
                m_sectors,
                num_classes,
                num_points,
                ..
            } => {
                if *m_sectors == 0 || *num_classes == 0 || *num_points == 0 {
                    return Err("dataset.m_sectors, num_classes and num_points must be positive".into());
                }
            }
            DatasetConfig::Cifar10 { pca_dims, .. } => {
                if *pca_dims == 0 || *pca_dims > ovr_core::datasets::CIFAR_IMAGE_BYTES {
                    return Err(format!("dataset.pca_dims {pca_dims} must lie in 1..=3072"));
                }
            }
        }
        Ok(())
    }

    /// Checks that the files the run reads are present.
    pub fn check_paths(&self) -> Result<()> {
        if let DatasetConfig::Cifar10 { path, .. } = &self.dataset {
            if !path.is_dir() {
                return Err(CliError::Invalid(format!(
                    "CIFAR-10 directory {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let o = &self.optimizer;
        TrainConfig {
            epochs: self.epochs,
            batch_size: o.batch_size,
            lr: o.lr,
            adam: o.adam(),
            scheduler: o.plateau.then(|| PlateauScheduler {
                patience: o.patience,
                factor: o.factor,
                min_improvement: o.min_improvement,
                ..PlateauScheduler::default()
            }),
            seed: self.seed,
            input_drop: self.dropout.input,
            hidden_drop: self.dropout.hidden,
            reg: self.reg,
            select_best: o.select_best,
        }
    }

    pub fn encoder_config(&self) -> OvrEncoderConfig {
        let e = &self.encoder;
        OvrEncoderConfig {
            hidden_units: self.hidden_units,
            lambda: self.reg.lambda,
            activation: self.activation,
            update_rule: e.update_rule,
            step_rule: e.step_rule,
            batch_size: self.optimizer.batch_size,
            lr: self.optimizer.lr,
            epochs: self.epochs,
            seed: self.seed,
            use_bias: e.use_bias,
            include_diagonal: e.include_diagonal,
            row_normalize: e.row_normalize,
            activity_term: e.activity_term,
            adam: self.optimizer.adam(),
        }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            epochs: self.probe.epochs,
            lr: self.probe.lr,
            batch_size: self.probe.batch_size,
            seed: self.seed,
        }
    }

    /// SHA-256 over everything that affects results (output settings and
    /// the sweep grid excluded), as lowercase hex.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        canonical.grid = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Reported regularization strength; zero when no penalty is active.
    pub fn effective_lambda(&self) -> f64 {
        match self.model {
            ModelKind::OvrEncoder => self.reg.lambda,
            ModelKind::Mlp | ModelKind::Autoencoder | ModelKind::DenoisingAutoencoder
                if self.reg.kind != ovr_core::regularizers::RegKind::None =>
            {
                self.reg.lambda
            }
            _ => 0.0,
        }
    }

    /// Expands `[grid]` into concrete configs. Without a grid the config
    /// itself is the only cell.
    pub fn expand_grid(&self) -> Vec<ExperimentConfig> {
        let mut base = self.clone();
        let grid = base.grid.take().unwrap_or_default();
        let mut cells = vec![base];
        fn cross<T: Copy>(cells: Vec<ExperimentConfig>, values: &[T], set: impl Fn(&mut ExperimentConfig, T)) -> Vec<ExperimentConfig> {
            if values.is_empty() {
                return cells;
            }
            let mut out = Vec::with_capacity(cells.len() * values.len());
            for c in cells {
                for &v in values {
                    let mut c = c.clone();
                    set(&mut c, v);
                    out.push(c);
                }
            }
            out
        }
        cells = cross(cells, &grid.model, |c, v| c.model = v);
        cells = cross(cells, &grid.hidden_units, |c, v| c.hidden_units = v);
        cells = cross(cells, &grid.lambda, |c, v| c.reg.lambda = v);
        cells = cross(cells, &grid.activation, |c, v| c.activation = v);
        cells = cross(cells, &grid.seed, |c, v| c.seed = v);
        cells = cross(cells, &grid.input_dropout, |c, v| c.dropout.input = v);
        cells
    }
}
