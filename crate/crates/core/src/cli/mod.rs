//! Command-line driver: configured sweeps, validation and plotting.

pub mod config;
pub mod plot;
pub mod run;

use std::fmt;
use std::path::Path;

pub use config::{Config, SweepAxis, SweepSpec};
pub use plot::{plot_csv, PlotKind};
pub use run::{run_config, write_atomic, ResultRow, RESULTS_HEADER};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad or inconsistent configuration.
    Config(String),
    Io(String),
    /// The simulation itself failed on a valid configuration.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Loads a config and builds every sweep point without simulating.
pub fn validate_config(path: &Path, seed_override: Option<u64>) -> Result<String, CliError> {
    let mut cfg = Config::load(path)?;
    if let Some(s) = seed_override {
        cfg.override_seed(s);
    }
    let points = run::plan(&cfg)?;
    let mut report = cfg.report();
    report.push_str(&format!("points: {} scenario(s)\n", points.len()));
    Ok(report)
}
