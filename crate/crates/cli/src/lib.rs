//! Config-driven runner for the pressure, variational-principle, lemma and
//! dimension experiments.

pub mod config;
pub mod report;
pub mod verbs;

use std::path::{Path, PathBuf};
use std::time::Instant;

use subpress_core::numeric::{Budget, DEFAULT_BUDGET};

pub use config::{ExperimentConfig, Verb};
pub use report::{Check, Outcome};

pub const BUDGET_ENV: &str = "SUBPRESS_BUDGET";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] subpress_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

/// Budget cap from the config, else the environment, else the default.
pub fn resolve_budget(cfg: &ExperimentConfig) -> Result<u64, CliError> {
    if let Some(b) = cfg.run.budget {
        return Ok(b);
    }
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!("{BUDGET_ENV}: `{v}` is not a non-negative integer"))
        }),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut tree = config::load_tree(path)?;
    for o in overrides {
        config::apply_override(&mut tree, o)?;
    }
    config::parse_config(tree)
}

/// Files written by one run.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub report: PathBuf,
    pub csv: Option<PathBuf>,
    pub timing: PathBuf,
    pub wall_seconds: f64,
}

/// Run the configured verb and write its report files.
pub fn run(mut cfg: ExperimentConfig) -> Result<(Outcome, RunFiles), CliError> {
    let started = Instant::now();
    let cap = resolve_budget(&cfg)?;
    cfg.run.budget = Some(cap);
    let budget = Budget::new(cap);
    let sys = cfg.system()?;
    let outcome = verbs::dispatch(&cfg, &sys, &budget)?;
    let files = report::write(&cfg, &outcome, &budget, started.elapsed())?;
    Ok((outcome, files))
}
