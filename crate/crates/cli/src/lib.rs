//! Command-line pipeline around the `mrp` library: elicit priors from a
//! catalog, fit, summarize, forecast, backtest and simulate, with every
//! stage communicating through files in one output directory.

pub mod config;
pub mod error;
pub mod stages;

pub use config::{Overrides, Resolved, RunConfig};
pub use error::{CliError, StageFailure};

/// Runs `f` on a thread pool of `jobs` threads; `None` keeps the global
/// pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
