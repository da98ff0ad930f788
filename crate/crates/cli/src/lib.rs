//! Experiment driver behind the `wfalearn` binary.
//!
//! Four commands cover the full loop: `generate` samples bracket-language
//! datasets, `train` learns one model, `eval` scores a saved model, and
//! `sweep` runs a (variant, rank, sample size, seed) grid into a CSV
//! table. Everything is deterministic in the master seed: datasets,
//! network initialization, and sweep cells all draw from seeds derived
//! per purpose, so reruns and parallel runs produce identical bytes.

pub mod commands;
pub mod config;
pub mod sweep;

pub use commands::{run_eval, run_generate, run_train, GenerateSummary, TrainSummary};
pub use config::{ExperimentConfig, Overrides};
pub use sweep::{run_sweep, SweepSummary};

/// Process-level failures, each with its exit code: configuration
/// problems exit 2, training divergence 3, file-system trouble 4.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Divergence(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub(crate) fn from_core(err: wfalearn_core::Error) -> CliError {
    use wfalearn_core::Error as E;
    match &err {
        E::Diverged { .. } | E::DegenerateModel => CliError::Divergence(err.to_string()),
        E::Io(_) | E::Parse { .. } | E::Json(_) => CliError::Io(err.to_string()),
        E::EmptySamples | E::InvalidArgument(_) => CliError::Config(err.to_string()),
    }
}
