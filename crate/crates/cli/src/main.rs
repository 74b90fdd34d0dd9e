//! `tar-aarch` command-line front end.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 non-convergence,
//! 4 failed Monte Carlo experiment.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "tar-aarch", version, about = "Threshold AR models with asymmetric ARCH errors")]
struct Cli {
    /// Random seed (simulate) or base-seed override (mc).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for parallel work (defaults to the available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn prices into returns, or apply the sunspot square-root transform.
    Transform(commands::transform::Args),
    /// Simulate a path from a model file or a canned model.
    Simulate(commands::simulate::Args),
    /// Fit a model to one column of a CSV file.
    Fit(commands::fit::Args),
    /// Run a Monte Carlo experiment plan.
    Mc(commands::mc::Args),
    /// Black-Scholes price of a European call.
    #[command(allow_negative_numbers = true)]
    Price(commands::price::Args),
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let globals = Globals {
        seed: cli.seed,
        output: cli.output,
        format: cli.format,
    };
    match cli.command {
        Command::Transform(a) => commands::transform::run(&a, &globals),
        Command::Simulate(a) => commands::simulate::run(&a, &globals),
        Command::Fit(a) => commands::fit::run(&a, &globals),
        Command::Mc(a) => commands::mc::run(&a, &globals),
        Command::Price(a) => commands::price::run(&a, &globals),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
