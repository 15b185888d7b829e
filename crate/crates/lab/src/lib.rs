//! Experiment driver for `temple-core`: config and metric files, the six
//! experiments, and report emission.

pub mod config;
pub mod experiments;
pub mod output;
pub mod spec;

pub use config::{Experiment, ExperimentConfig};
pub use output::{emit_report, Outcome};

use temple_core::report::Verdict;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] temple_core::Error),
    #[error("precondition rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Exit status for configuration, domain and IO errors.
pub const ERROR_EXIT_CODE: i32 = 3;

pub fn verdict_exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Inconclusive => 2,
    }
}

/// Runs the configured experiment on a pool of `threads` workers (all cores
/// when `None`). The result does not depend on the thread count.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome, LabError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    pool.install(|| experiments::dispatch(config))
}
