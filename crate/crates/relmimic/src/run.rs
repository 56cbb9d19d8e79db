//! Multi-seed runs: resolve demonstrations, train each seed into its own
//! directory and aggregate the results.

use std::path::Path;

use relmimic_core::env::{record_demos, DemonstrationSet};

use crate::config::TrainConfig;
use crate::demo_file;
use crate::error::{Error, Result};
use crate::report::{self, RunReport};
use crate::train::{self, IterationLog, SeedRun};

/// Load the configured demonstration file, or record a fresh set.
pub fn demonstrations(cfg: &TrainConfig) -> Result<DemonstrationSet> {
    match &cfg.demos {
        Some(path) => demo_file::load_expecting(path, cfg.resolution),
        None => Ok(record_demos(cfg.n_demos, cfg.demo_seed, cfg.resolution)?.0),
    }
}

/// Results of [`run_training`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seeds: Vec<SeedRun>,
    pub report: RunReport,
    pub expert_mean: f64,
}

/// Train every configured seed under `out/seed_<n>` and write the run
/// summary. The resolved configuration is saved as `out/config.txt`.
pub fn run_training(
    cfg: &TrainConfig,
    out: &Path,
    mut on_row: impl FnMut(u64, &IterationLog),
) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg_path = out.join("config.txt");
    std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    let demos = demonstrations(cfg)?;
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let dir = out.join(format!("seed_{seed}"));
        seeds.push(train::run_seed(cfg, seed, &demos, &dir, &mut on_row)?);
    }
    let expert_mean = train::expert_score(cfg.eval_episodes);
    let report = report::report_run(out, cfg.variant.label(), Some(expert_mean))?;
    Ok(RunOutcome {
        seeds,
        report,
        expert_mean,
    })
}
