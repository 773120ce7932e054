//! Library side of the `ppoinc` command-line tool. Every subcommand is a
//! function taking a resolved [`RunConfig`] and an output directory, so the
//! acceptance suite can drive the same code paths as the binary.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_baseline, cmd_diagrams, cmd_eval, cmd_gradcheck, cmd_stability, cmd_train, prepare,
    Context, MetricRow,
};
pub use config::RunConfig;

use poincare_persistence::data::DataError;
use poincare_persistence::learn::LearnError;
use poincare_persistence::representation::ReprError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error("{0}")]
    Io(String),
    /// A numerical check (gradient check, stability bound) failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    /// 1 for validation and input failures, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Learn(e) if e.is_numerical() => 2,
            Self::Repr(ReprError::Hyperbolic(_)) | Self::Check(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
