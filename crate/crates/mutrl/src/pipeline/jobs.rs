//! Order-preserving fan-out over independent jobs.
//!
//! With the `parallel` feature (the default) jobs run on a rayon pool sized
//! by the worker count; without it, or with one worker, they run
//! sequentially. Results always come back in input order, so the worker
//! count can never change what gets written to disk.

use crate::Result;

/// Map `f` over `items`, preserving order and failing on the first error.
/// `workers` 0 means one thread per core.
#[cfg(feature = "parallel")]
pub fn try_par_map<T, U, F>(items: Vec<T>, workers: usize, f: F) -> Result<Vec<U>>
where
    T: Send,
    U: Send,
    F: Fn(T) -> Result<U> + Send + Sync,
{
    use rayon::prelude::*;

    match workers {
        1 => items.into_iter().map(f).collect(),
        0 => items.into_par_iter().map(f).collect(),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::Error::arg(format!("cannot build thread pool: {e}")))?;
            pool.install(|| items.into_par_iter().map(f).collect())
        }
    }
}

/// Sequential fallback when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn try_par_map<T, U, F>(items: Vec<T>, _workers: usize, f: F) -> Result<Vec<U>>
where
    T: Send,
    U: Send,
    F: Fn(T) -> Result<U> + Send + Sync,
{
    items.into_iter().map(f).collect()
}
