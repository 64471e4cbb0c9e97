use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ovr_cli::config::DatasetConfig;
use ovr_cli::features::export_features;
use ovr_cli::plot::{plot_csv, PlotRequest};
use ovr_cli::runner::probe_checkpoint;
use ovr_cli::{run_experiment, sweep, ExperimentConfig, RunStatus, SweepOptions};
use ovr_core::datasets::{generate_sphere_dataset, write_sphere_csv, SpherePartitionSpec};

#[derive(Parser)]
#[command(name = "ovr", version, about = "OVR sparsity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or file, for single-artifact commands).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a partitioned-sphere dataset as CSV (x,y,z,label).
    GenSphere {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        m_sectors: usize,
        #[arg(long, default_value_t = 4)]
        n_cuts: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 5000)]
        points: usize,
    },
    /// Train one configured model and append its rows to the results CSV.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Run every cell of the config's [grid].
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Rerun cells already present in the results CSV.
        #[arg(long)]
        force: bool,
    },
    /// Fit a logistic probe on the features of a saved checkpoint.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Render first-layer weights as 32x32 RGB tiles (PPM, optionally PNG).
    ExportFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        /// PCA checkpoint written by a CIFAR-10 run.
        #[arg(long)]
        pca: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        grid_cols: usize,
        /// Layer prefix in the checkpoint (default: encoder, then hidden).
        #[arg(long)]
        layer: Option<String>,
        #[arg(long)]
        png: bool,
    },
    /// Plot one CSV column against another as SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "lambda")]
        x: String,
        #[arg(long, default_value = "sparsity")]
        y: String,
        #[arg(long)]
        group_by: Option<String>,
        /// Keep rows where COLUMN equals VALUE; repeatable.
        #[arg(long = "filter", value_name = "COLUMN=VALUE")]
        filters: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = &common.config else {
        bail!("--config is required");
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.check_paths()?;
    Ok(cfg)
}

fn gen_sphere(common: &Common, m_sectors: usize, n_cuts: usize, classes: usize, points: usize) -> anyhow::Result<()> {
    let mut spec = SpherePartitionSpec {
        m_sectors,
        n_cuts,
        num_classes: classes,
        num_points: points,
        seed: 0,
    };
    if common.config.is_some() {
        let cfg = load_config(common)?;
        match cfg.dataset {
            DatasetConfig::Sphere {
                m_sectors,
                n_cuts,
                num_classes,
                num_points,
                seed,
            } => {
                spec = SpherePartitionSpec {
                    m_sectors,
                    n_cuts,
                    num_classes,
                    num_points,
                    seed: seed.unwrap_or(cfg.seed),
                }
            }
            DatasetConfig::Cifar10 { .. } => bail!("gen-sphere needs a sphere dataset config"),
        }
    }
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("sphere.csv"));
    let data = generate_sphere_dataset(&spec)?;
    write_sphere_csv(&data, &out)?;
    println!("wrote {} points to {}", data.num_samples(), out.display());
    Ok(())
}

fn print_final(records: &[ovr_cli::RunRecord]) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for r in records.iter().filter(|r| r.status != RunStatus::Epoch) {
        println!(
            "{} {} hidden={} lambda={:e} seed={} sparsity={} probe_accuracy={}{}",
            r.run_id,
            r.model,
            r.hidden,
            r.lambda,
            r.seed,
            fmt(r.sparsity),
            fmt(r.probe_accuracy),
            if r.message.is_empty() {
                String::new()
            } else {
                format!(" error: {}", r.message)
            }
        );
    }
}

fn parse_filter(f: &str) -> anyhow::Result<(String, String)> {
    let (k, v) = f.split_once('=').with_context(|| format!("filter {f:?} is not COLUMN=VALUE"))?;
    Ok((k.to_string(), v.to_string()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenSphere {
            common,
            m_sectors,
            n_cuts,
            classes,
            points,
        } => gen_sphere(&common, m_sectors, n_cuts, classes, points)?,
        Command::Train { common } => {
            let cfg = load_config(&common)?;
            let records = run_experiment(&cfg)?;
            print_final(&records);
            println!("rows appended to {}", cfg.output.csv_path().display());
        }
        Command::Sweep { common, jobs, force } => {
            let cfg = load_config(&common)?;
            let report = sweep(&cfg, SweepOptions { jobs, force })?;
            println!(
                "{} cells run, {} skipped, {} failed; results in {}",
                report.ran,
                report.skipped,
                report.failed,
                cfg.output.csv_path().display()
            );
        }
        Command::Probe { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let (accuracy, sparsity) = probe_checkpoint(&cfg, &checkpoint)?;
            println!(
                "probe_accuracy={accuracy:.4} sparsity={}",
                sparsity.map_or("-".into(), |s| format!("{s:.4}"))
            );
        }
        Command::ExportFeatures {
            checkpoint,
            pca,
            out,
            grid_cols,
            layer,
            png,
        } => {
            let img = export_features(&checkpoint, &pca, &out, grid_cols, layer.as_deref(), png)?;
            println!("wrote {}x{} image to {}", img.width, img.height, out.display());
        }
        Command::Plot {
            csv,
            x,
            y,
            group_by,
            filters,
            out,
        } => {
            let req = PlotRequest {
                x_column: &x,
                y_column: &y,
                group_by: group_by.as_deref(),
                filters: filters.iter().map(|f| parse_filter(f)).collect::<anyhow::Result<_>>()?,
            };
            let series = plot_csv(&csv, &req, &out)?;
            println!("plotted {} series to {}", series.len(), Path::new(&out).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
