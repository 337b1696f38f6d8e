//! Command implementations behind the `stereogen` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod selfcheck;

pub use error::{CliError, CliResult};

/// Environment variable read for the worker count when `--workers` is unset.
pub const WORKERS_ENV: &str = "STEREOGEN_WORKERS";

/// Runs `f` on a dedicated rayon pool. `None` or `0` uses the rayon default.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers.filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
