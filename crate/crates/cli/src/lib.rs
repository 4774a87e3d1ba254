//! Experiment runner for the `juryopt` binary: JSON configs and presets,
//! the `sweep`, `house`, `optk`, `audit` and `multi` commands, and CSV/JSON
//! output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run_preset, Command};
pub use config::{preset, ExperimentConfig, PRESET_NAMES};
pub use error::{CliError, Result};
pub use output::{ResultSet, Table};

/// Environment variable capping the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "JURYOPT_THREADS";

/// Parses a thread-count setting; `None` means automatic.
pub fn parse_threads(value: &str) -> Result<Option<usize>> {
    match value.trim().parse::<usize>() {
        Ok(0) => Ok(None),
        Ok(n) => Ok(Some(n)),
        Err(e) => Err(CliError::Config { field: THREADS_ENV.into(), message: e.to_string() }),
    }
}
