//! Configuration-driven Monte Carlo harness over the spectral perturbation
//! library: deviation curves, fluctuation scatters with level curves,
//! spike densities, and concentration diagnostics, with CSV, SVG, and
//! manifest outputs.

pub mod config;
pub mod csv;
pub mod experiments;
pub mod manifest;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind, ModelConfig, NoiseConfig};
pub use experiments::{execute, render_csv, Overrides, RunSummary};
pub use manifest::RunManifest;

/// Harness-level failures with their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("aborted: {failed} of {total} replicates failed (over the failure budget)")]
    FailureRate { failed: usize, total: usize },

    #[error("render error: {0}")]
    Render(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// Process exit code: 2 for config errors, 3 for failure-rate aborts,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::FailureRate { .. } => 3,
            _ => 1,
        }
    }
}

/// Worker count: the `SPECNOISE_THREADS` environment variable overrides any
/// requested value, which in turn overrides the detected parallelism.
pub fn effective_threads(requested: Option<usize>) -> usize {
    let env = std::env::var("SPECNOISE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t > 0);
    env.or(requested)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1)
}
