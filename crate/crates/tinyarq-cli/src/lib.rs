//! Experiment runner for `tinyarq`: parameter sweeps comparing analysis with
//! simulation, delay CCDFs with sub-Gaussian bounds, and coded-vs-uncoded
//! throughput comparisons. Output is CSV (9 significant digits) and minimal
//! SVG; given the same configuration and seed every file is byte-identical.

// `!(x > 0.0)` and friends are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod format;
pub mod run;
pub mod svg;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, read_config, AlphaRule, ChannelKind, SimSettings, SweepSpec};
pub use run::{run_ccdf, run_compare, run_sweep, CcdfReport, CompareReport, SweepReport};

/// Errors of the experiment runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    /// Invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// An output file or directory could not be written.
    #[error("cannot write {}: {message}", path.display())]
    Output {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        message: String,
    },
    /// Analysis or simulation failed at a grid point.
    #[error("numerical failure at {point}: {message}")]
    Numerical {
        /// The grid point.
        point: String,
        /// Underlying error.
        message: String,
    },
}

impl CliError {
    /// Process exit code: 2 for configuration and output problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}
