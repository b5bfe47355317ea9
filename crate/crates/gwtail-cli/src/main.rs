//! Command line front end: tail probabilities, branching-time fluctuations,
//! scale solutions, self-verification and Monte Carlo simulation for
//! supercritical branching processes with and without immigration.
//!
//! Exit codes: 0 success, 1 verification check failed, 2 configuration
//! error, 3 numerical failure.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "gwtail", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Model configuration file (TOML or JSON)
    #[arg(long, env = "GWTAIL_MODEL")]
    model: PathBuf,
    /// Output directory for CSV/JSON results and the run manifest
    #[arg(long, env = "GWTAIL_OUT", default_value = ".")]
    out: PathBuf,
    /// Worker threads for Monte Carlo sampling (0 = all cores)
    #[arg(long, env = "GWTAIL_THREADS", default_value_t = 0)]
    threads: usize,
    /// Seed override for Monte Carlo runs
    #[arg(long, env = "GWTAIL_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Left-tail probabilities P{W < eps} (or with immigration) for a list
    /// of eps, by inversion, Monte Carlo, or the closed predictors
    Tail {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated list of eps values
        #[arg(long, env = "GWTAIL_EPS", value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// invert | mc | predict
        #[arg(long, env = "GWTAIL_METHOD", default_value = "invert")]
        method: String,
        /// Monte Carlo sample budget (method = mc)
        #[arg(long, env = "GWTAIL_SAMPLES", default_value_t = 1_000_000)]
        samples: u64,
        /// Monte Carlo truncation depth (method = mc)
        #[arg(long, env = "GWTAIL_GENS", default_value_t = 30)]
        gens: u32,
    },
    /// Conditional first-branching fluctuations around floor(gamma):
    /// quadrature vs the double-exponential predictor
    Fluctuation {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "GWTAIL_EPS", required = true)]
        eps: f64,
        /// Offset range as "lo..hi" (inclusive), e.g. "-2..3"
        #[arg(long, env = "GWTAIL_X", default_value = "-2..3")]
        x: String,
    },
    /// Solved scale bundle (omega, rho, N, {rho}, gamma, gamma_s, u) per eps
    Scales {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "GWTAIL_EPS", value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// Full invariant suite; JSON report, exit 1 on any failed check
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo tail estimates
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, env = "GWTAIL_EPS", value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, env = "GWTAIL_SAMPLES", default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, env = "GWTAIL_GENS", default_value_t = 30)]
        gens: u32,
    },
}

/// Error category carrying the process exit code.
pub enum CliError {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
    ChecksFailed,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::ChecksFailed => 1,
        }
    }
}

pub fn numerical(e: gwtail_core::Error) -> CliError {
    CliError::Numerical(anyhow::anyhow!("{e}"))
}

fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn run() -> CliResult<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Tail { common, eps, method, samples, gens } => {
            init_threads(common.threads);
            commands::tail::run(&common, &eps, &method, samples, gens)
        }
        Command::Fluctuation { common, eps, x } => {
            init_threads(common.threads);
            commands::fluctuation::run(&common, eps, &x)
        }
        Command::Scales { common, eps } => commands::scales::run(&common, &eps),
        Command::Verify { common } => commands::verify::run(&common),
        Command::Simulate { common, eps, samples, gens } => {
            init_threads(common.threads);
            commands::simulate::run(&common, &eps, samples, gens)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(err) => eprintln!("configuration error: {err:#}"),
                CliError::Numerical(err) => eprintln!("numerical failure: {err:#}"),
                CliError::ChecksFailed => eprintln!("verification failed"),
            }
            ExitCode::from(e.code())
        }
    }
}
