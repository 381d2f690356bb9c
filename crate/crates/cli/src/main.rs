//! `simcal` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 simulator failure.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "simcal", version, about = "Calibrate stochastic simulators with eligibility sets")]
pub struct Cli {
    /// Significance level; overrides the config value.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a simulator and write one output vector per row.
    Simulate(SimulateArgs),
    /// Apply a feature extractor to every row of a CSV.
    Extract(ExtractArgs),
    /// Build an eligibility set and write per-candidate decisions.
    Calibrate(CalibrateArgs),
    /// Estimate the Type I error of the test at the truth.
    Typeerror(TypeErrorArgs),
    /// Stylized facts of return series.
    Realism(RealismArgs),
    /// Type II bound, minimum real-data size and robust bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON config; only its `model` is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mm1, gg1 or market.
    #[arg(long)]
    pub model: Option<String>,
    /// Reference market configuration (1-17).
    #[arg(long)]
    pub preset: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Customers per queue run.
    #[arg(long)]
    pub customers: Option<usize>,
    /// Any model parameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Extractor spec or neural weights JSON (default: summary statistics).
    #[arg(long)]
    pub extractor: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunOverrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Real-data size N.
    #[arg(long = "big-n")]
    pub big_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extractor spec or neural weights JSON.
    #[arg(long)]
    pub extractor: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Number of candidates.
    #[arg(long)]
    pub m: Option<usize>,
    /// grid or uniform_random.
    #[arg(long)]
    pub candidates: Option<String>,
    /// Observed data CSV, one run per row.
    #[arg(long)]
    pub real_data: Option<PathBuf>,
    /// Decisions CSV (default decisions.csv).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Summary JSON (default <output>.summary.json).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TypeErrorArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Report JSON (default stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RealismArgs {
    /// Returns CSV, one series per row. Without it the market is simulated.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON (default stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "big-n")]
    pub big_n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    /// KS gap for the minimum real-data size.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Number of features for the minimum real-data size.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Decisions CSV from `calibrate`, for robust bounds.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    /// CSV with columns id,psi.
    #[arg(long)]
    pub psi: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub(crate) fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(alpha) = cli.alpha {
        config::check_alpha(alpha)?;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::invalid(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Extract(a) => commands::extract(a),
        Command::Calibrate(a) => commands::calibrate(a, cli.alpha),
        Command::Typeerror(a) => commands::typeerror(a, cli.alpha),
        Command::Realism(a) => commands::realism(a),
        Command::Bounds(a) => commands::bounds(a, cli.alpha),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_INVALID as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simcal: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
