//! Synthetic experiments for the `rt2pl` estimator and the plumbing behind the
//! `rt2pl` command-line tool: experiment specs, per-trial CSV records and
//! their summaries.

pub mod experiments;
pub mod record;
pub mod spec;
pub mod stats;

pub use experiments::{run_experiment, ExperimentOutput, LandscapeSample};
pub use record::{summarize, SummaryRow, TrialRecord};
pub use spec::{ExperimentKind, ExperimentSpec, InitMode};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] rt2pl::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config file: {0}")]
    TomlRead(#[from] toml::de::Error),
    #[error("config file: {0}")]
    TomlWrite(#[from] toml::ser::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, BenchError>;
