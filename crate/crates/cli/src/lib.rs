//! Experiment runner for `hmmob`: simulate data, fit posteriors, and report
//! order estimates, marginal distances and the two-state emptying check.
//!
//! Each command reads one JSON [`config::ExperimentConfig`] and writes into its
//! output directory; see [`files`] for the layout.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

pub use commands::{cmd_distance, cmd_fit, cmd_order, cmd_simulate, cmd_twostate};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// Env var that overrides `--jobs`.
pub const JOBS_ENV: &str = "HMMOB_JOBS";

/// Worker count: the env value if set, else the flag. `None` means the
/// rayon default.
pub fn resolve_jobs(flag: Option<usize>, env: Option<&str>) -> CliResult<Option<usize>> {
    let jobs = match env {
        Some(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| CliError::config(format!("{JOBS_ENV}={v:?}: {e}")))?,
        ),
        None => flag,
    };
    match jobs {
        Some(0) => Err(CliError::config("jobs must be at least 1")),
        j => Ok(j),
    }
}
