//! Command-line front end. Each subcommand writes plot-ready CSV and/or a
//! JSON report; every output records the tool version, the configuration,
//! the seed and a checksum of its input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::dataset::BUILTIN_TAG;
use crate::fitting::{DEFAULT_MULTISTART, DEFAULT_SEED};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "nvrelax", version, about = "NV-center spin-lattice relaxation: fits, rate integrals, protocol simulation")]
pub struct Cli {
    /// Worker threads for multistart fits and temperature sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a rate law to measured Ω(T), γ(T).
    Fit(FitArgs),
    /// Evaluate a rate law and its coherence limits on a temperature grid.
    Eval(EvalArgs),
    /// Broaden a coupling table and integrate second-order Raman rates.
    Spectral(SpectralArgs),
    /// Simulate the two-curve relaxation protocol and extract Ω, γ.
    Simulate(SimulateArgs),
    /// Fit several rate laws to one dataset and rank them.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV path, or the builtin tag for the embedded table.
    #[arg(long, default_value = BUILTIN_TAG)]
    pub data: String,
    /// Keep T ≥ 125 K and fix the sample constants at zero.
    #[arg(long)]
    pub phonon_limited_only: bool,
    #[arg(long, default_value_t = DEFAULT_MULTISTART)]
    pub multistart: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// n-mode:1, n-mode:2, n-mode:3 or prior.
    #[arg(long, default_value = "n-mode:2")]
    pub model: String,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the normalized residual table as CSV.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TemperatureGrid {
    #[arg(long, default_value_t = 10.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 500.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_step: f64,
    /// Explicit comma-separated temperatures; overrides the range.
    #[arg(long, value_delimiter = ',')]
    pub temperatures: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Parameter JSON or fit report; `published` for the built-in two-mode values.
    #[arg(long)]
    pub params: String,
    /// Sample whose constants are added; omit for the phonon part only.
    #[arg(long)]
    pub sample: Option<String>,
    #[command(flatten)]
    pub grid: TemperatureGrid,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    /// Coupling CSV (`energy_mev,amplitude_mhz,channel,order`).
    #[arg(long)]
    pub couplings: PathBuf,
    /// Gaussian broadening width, meV.
    #[arg(long, default_value_t = crate::spectral::DEFAULT_SIGMA_MEV)]
    pub sigma: f64,
    #[arg(long, default_value_t = 250.0)]
    pub e_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub e_step: f64,
    #[command(flatten)]
    pub grid: TemperatureGrid,
    /// Fit the two-mode law (no constants) to the computed rate curve.
    #[arg(long)]
    pub refit: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// True Ω, s⁻¹.
    #[arg(long)]
    pub omega: f64,
    /// True γ, s⁻¹.
    #[arg(long)]
    pub gamma: f64,
    /// Shots per readout per delay; omit for noise-free curves.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Number of delays, spaced evenly out to three decay times.
    #[arg(long, default_value_t = 20)]
    pub taus: usize,
    #[arg(long, default_value_t = 1.0)]
    pub bright: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dark: f64,
    /// Curve as `INIT:A,B`, e.g. `0:0,+1`. Give exactly two, or none for the standard pair.
    #[arg(long = "curve", allow_hyphen_values = true)]
    pub curves: Vec<String>,
    /// Temperature label for the synthetic dataset row, K.
    #[arg(long, default_value_t = 295.0)]
    pub temperature: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated models; the first is the reference for predictions.
    #[arg(long, value_delimiter = ',', default_value = "n-mode:2,prior")]
    pub models: Vec<String>,
    /// Temperature at which each model's Ω and γ are extrapolated, K.
    #[arg(long, default_value_t = 700.0)]
    pub at_temperature: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes and their exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 1.
    #[error("{0}")]
    Input(String),
    /// Exit code 2. Outputs have still been written.
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::NonConvergence(_) => 2,
        }
    }
}

/// Parses `std::env::args`, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvrelax: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
