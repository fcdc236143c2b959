//! Experiment CLI: reads a JSON config, runs the requested analysis or
//! simulation, and writes a deterministic CSV table.
//!
//! Exit codes: 0 success, 1 config error, 2 validation failure, 3 internal
//! numeric failure.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Overrides;
use config::ConfigFile;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Validation(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Validation(msg) => write!(f, "validation failure: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric failure: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "aoi",
    about = "Peak/average age-of-information analytics and Monte Carlo experiments \
             for an energy-harvesting sensing-and-transmission node"
)]
struct Cli {
    /// Experiment configuration file (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Output path, or '-' for stdout.
    #[arg(long, global = true, default_value = "-")]
    out: String,
    /// Override the configured rng seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured number of recorded departures.
    #[arg(long, global = true)]
    departures: Option<u64>,
    /// Worker threads for sweeps and simulation batches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal peak-age threshold across an energy-rate grid.
    SolvePeak,
    /// Optimal peak age across the sensing-variance parameterization.
    VarianceSweep,
    /// Best hybrid and POD average age across a parameter grid.
    AvgSweep,
    /// Analytical quantities for a single policy.
    Eval,
    /// Monte Carlo estimates for a single policy.
    Simulate,
    /// Analytics-vs-simulation cross-validation table.
    Validate,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let text = fs::read_to_string(&cli.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", cli.config.display()))
    })?;
    let config = ConfigFile::parse(&text)?;
    let overrides = Overrides {
        seed: cli.seed,
        departures: cli.departures,
    };
    match cli.command {
        Command::SolvePeak => commands::cmd_solve_peak(&config),
        Command::VarianceSweep => commands::cmd_variance_sweep(&config),
        Command::AvgSweep => commands::cmd_avg_sweep(&config),
        Command::Eval => commands::cmd_eval(&config),
        Command::Simulate => commands::cmd_simulate(&config, overrides),
        Command::Validate => {
            let (csv, any_violation) = commands::cmd_validate(&config, overrides)?;
            if any_violation {
                // Still write the table so the failing rows are inspectable.
                write_output(&cli.out, &csv)?;
                return Err(CliError::Validation(
                    "an exactness-expected quantity exceeded |z| = 3".into(),
                ));
            }
            Ok(csv)
        }
    }
}

fn write_output(out: &str, text: &str) -> Result<(), CliError> {
    if out == "-" || out == "stdout" {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Numeric(format!("cannot write to stdout: {e}")))
    } else {
        fs::write(out, text).map_err(|e| CliError::Numeric(format!("cannot write {out}: {e}")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };

    let result = match cli.threads {
        Some(threads) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool,
                Err(e) => {
                    eprintln!("config error: cannot build a {threads}-thread pool: {e}");
                    return ExitCode::from(1);
                }
            };
            pool.install(|| run(&cli))
        }
        None => run(&cli),
    };

    match result {
        Ok(csv) => match write_output(&cli.out, &csv) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => {
                eprintln!("{err}");
                ExitCode::from(err.exit_code())
            }
        },
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
