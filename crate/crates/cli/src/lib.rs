//! Batch front end for the `hyperseg` pipeline: argument grammar, commands,
//! presets and PNG rendering.

pub mod args;
pub mod commands;
pub mod error;
pub mod presets;
pub mod render;

pub use error::CliError;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "HYPERSEG_THREADS";

/// Sizes the global rayon pool from `HYPERSEG_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}
