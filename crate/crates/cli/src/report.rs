use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use subpress_core::numeric::Budget;

use crate::config::ExperimentConfig;
use crate::{CliError, RunFiles};

/// One asserted invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: Value,
    pub csv: Option<CsvTable>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct BudgetUsage {
    cap: u64,
    peak: u64,
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    verb: &'static str,
    seed: u64,
    status: &'static str,
    budget: BudgetUsage,
    checks: &'a [Check],
    result: &'a Value,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct Timing<'a> {
    verb: &'a str,
    wall_seconds: f64,
}

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Write `<prefix>.<verb>.json`, the CSV table if any, and the timing sidecar.
pub fn write(
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    budget: &Budget,
    elapsed: Duration,
) -> Result<RunFiles, CliError> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let stem = format!("{}.{}", cfg.output.prefix, cfg.run.verb.name());
    let report_path = dir.join(format!("{stem}.json"));
    let report = Report {
        tool: "subpress",
        version: env!("CARGO_PKG_VERSION"),
        verb: cfg.run.verb.name(),
        seed: cfg.run.seed,
        status: if outcome.passed() {
            "ok"
        } else {
            "invariant-violation"
        },
        budget: BudgetUsage {
            cap: budget.cap(),
            peak: budget.peak(),
        },
        checks: &outcome.checks,
        result: &outcome.result,
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| io_err(&report_path, e))?;
    text.push('\n');
    fs::write(&report_path, text).map_err(|e| io_err(&report_path, e))?;

    let csv_path = match &outcome.csv {
        Some(table) => {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
            w.write_record(&table.header)
                .map_err(|e| io_err(&path, e))?;
            for row in &table.rows {
                w.write_record(row).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            Some(path)
        }
        None => None,
    };

    let timing_path: PathBuf = dir.join(format!("{stem}.timing.json"));
    let timing = Timing {
        verb: cfg.run.verb.name(),
        wall_seconds: elapsed.as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&timing).map_err(|e| io_err(&timing_path, e))?;
    fs::write(&timing_path, text + "\n").map_err(|e| io_err(&timing_path, e))?;
    Ok(RunFiles {
        report: report_path,
        csv: csv_path,
        timing: timing_path,
        wall_seconds: timing.wall_seconds,
    })
}
