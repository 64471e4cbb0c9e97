//! Grids of runs with a worker pool and resumable CSV output.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::record::{read_records, write_records, RunRecord, RunStatus};
use crate::runner::{execute, failure_record, prepare_data, save_artifacts, PreparedData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    /// Rerun cells that already have a `final` row.
    pub force: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { jobs: 1, force: false }
    }
}

/// Summary of one sweep invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<RunRecord>,
    pub ran: usize,
    pub skipped: usize,
    pub failed: usize,
}

fn dataset_key(cfg: &ExperimentConfig) -> String {
    serde_json::to_string(&(&cfg.dataset, cfg.seed, cfg.val_fraction)).expect("dataset serializes")
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        a.model
            .name()
            .cmp(b.model.name())
            .then(a.hidden.cmp(&b.hidden))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.seed.cmp(&b.seed))
            .then(a.config_hash.cmp(&b.config_hash))
    });
}

/// Runs every cell of `cfg`'s grid and writes the merged CSV to
/// `cfg.output`. Rows are ordered by (model, hidden, lambda, seed); a cell
/// whose config hash already has a `final` row in the output is skipped
/// unless `force` is set. Failing cells produce a `failed` row and do not
/// stop the sweep.
pub fn sweep(cfg: &ExperimentConfig, options: SweepOptions) -> Result<SweepReport> {
    let mut seen = BTreeSet::new();
    let cells: Vec<ExperimentConfig> = cfg
        .expand_grid()
        .into_iter()
        .filter(|c| seen.insert(c.config_hash()))
        .collect();
    if cells.is_empty() {
        return Err(CliError::Invalid("sweep grid is empty".into()));
    }
    let csv_path = cfg.output.csv_path();
    let previous = if csv_path.exists() {
        read_records(&csv_path)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<&str> = previous
        .iter()
        .filter(|r| r.status == RunStatus::Final && !options.force)
        .map(|r| r.config_hash.as_str())
        .collect();
    let (todo, skipped): (Vec<_>, Vec<_>) = cells.into_iter().partition(|c| !done.contains(c.config_hash().as_str()));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker pool: {e}")))?;
    let cache: Mutex<HashMap<String, std::sync::Arc<PreparedData>>> = Mutex::new(HashMap::new());
    let load = |c: &ExperimentConfig| -> Result<std::sync::Arc<PreparedData>> {
        let key = dataset_key(c);
        if let Some(d) = cache.lock().expect("cache lock").get(&key) {
            return Ok(d.clone());
        }
        let data = std::sync::Arc::new(prepare_data(c)?);
        cache.lock().expect("cache lock").insert(key, data.clone());
        Ok(data)
    };

    let results: Vec<Vec<RunRecord>> = pool.install(|| {
        todo.par_iter()
            .map(|c| {
                let start = Instant::now();
                let run = || -> Result<Vec<RunRecord>> {
                    let data = load(c)?;
                    let outcome = execute(c, &data)?;
                    save_artifacts(c, &outcome, data.pca.as_ref())?;
                    Ok(outcome.records)
                };
                run().unwrap_or_else(|e| vec![failure_record(c, &e, start.elapsed().as_secs_f64())])
            })
            .collect()
    });

    let failed = results
        .iter()
        .filter(|rows| rows.iter().any(|r| r.status == RunStatus::Failed))
        .count();
    let fresh: BTreeSet<String> = results.iter().flatten().map(|r| r.config_hash.clone()).collect();
    let mut records: Vec<RunRecord> = previous
        .into_iter()
        .filter(|r| !fresh.contains(&r.config_hash))
        .collect();
    records.extend(results.into_iter().flatten());
    sort_records(&mut records);
    write_records(&csv_path, &records)?;
    Ok(SweepReport {
        ran: todo.len(),
        skipped: skipped.len(),
        failed,
        records,
    })
}
