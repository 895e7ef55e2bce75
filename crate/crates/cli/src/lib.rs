//! Library half of the `spectratact` command-line runner.

pub mod commands;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::commands::{
    CalibrateArgs, DecodeArgs, SimulateArgs, SweepDesignArgs, TrackArgs, WorkspaceArgs,
};
pub use crate::error::CliError;

pub const THREADS_ENV: &str = "SPECTRATACT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectratact", version, about = "Spectral-filtering tactile sensor and soft-encoder twin toolkit")]
pub struct Cli {
    /// Project config (JSON). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out, or the recorded one for replay].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Format for series data.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the sensor model over positions x forces.
    Simulate(SimulateArgs),
    /// Fit position and force calibrations from a sweep table.
    Calibrate(CalibrateArgs),
    /// Decode readings into position and force.
    Decode(DecodeArgs),
    /// Replay a terminal trajectory through the five-bar twin.
    Track(TrackArgs),
    /// Tabulate the position response over waveguide lengths and dye concentrations.
    SweepDesign(SweepDesignArgs),
    /// Export the five-bar workspace mask and deviation map.
    Workspace(WorkspaceArgs),
    /// Rerun a command from its manifest and check outputs are byte-identical.
    Replay {
        manifest: PathBuf,
    },
}

pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
        if n == 0 {
            return Err(CliError::Config(format!("{THREADS_ENV} must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::run(cli)
}
