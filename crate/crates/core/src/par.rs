//! Execution policy for the node-parallel maps.
//!
//! Without the `parallel` feature every policy runs sequentially.

use serde::{Deserialize, Serialize};

/// Environment variable capping the worker count (0 = one per core).
pub const THREADS_ENV: &str = "GRADFLOW_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// `(0..n).map(f)` collected in index order, stopping at the first error.
pub fn try_map<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Like [`try_map`] for infallible maps.
pub fn map<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match try_map::<T, (), _>(exec, n, |i| Ok(f(i))) {
        Ok(v) => v,
        Err(()) => unreachable!(),
    }
}

/// Parses a thread count as found in [`THREADS_ENV`].
pub fn parse_threads(value: &str) -> Option<usize> {
    value.trim().parse().ok()
}

/// Sizes the global worker pool; `0` keeps the default. Returns `false` when the
/// pool was already initialised or the feature is off.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return false;
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Applies [`THREADS_ENV`] if it is set.
pub fn configure_from_env() -> bool {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| parse_threads(&v))
        .is_some_and(configure_threads)
}
