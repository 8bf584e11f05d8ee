use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subpress_cli::{load_config, run, CliError};

#[derive(Parser)]
#[command(
    name = "subpress",
    version,
    about = "Sub-additive pressure experiments for random subshifts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config (or a JSON report's config).
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set run.seed=7`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        /// Cap on worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let Command::Run {
        config,
        overrides,
        threads,
    } = cli.command;
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = load_config(&config, &overrides)?;
    let verb = cfg.run.verb.name();
    let (outcome, files) = run(cfg)?;
    for c in &outcome.checks {
        eprintln!(
            "{} {}: {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    eprintln!("{verb}: report {}", files.report.display());
    if let Some(csv) = &files.csv {
        eprintln!("{verb}: table {}", csv.display());
    }
    eprintln!("{verb}: wall time {:.3} s", files.wall_seconds);
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
