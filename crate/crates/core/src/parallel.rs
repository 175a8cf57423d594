//! Thread-pool sizing from the `MAXENT_THREADS` environment variable.

use rayon::ThreadPool;

pub const THREADS_ENV: &str = "MAXENT_THREADS";

/// Requested worker count; `0` (the default) means sequential.
pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// A pool with `threads` workers, or `None` for sequential execution.
pub fn pool(threads: usize) -> Option<ThreadPool> {
    if threads == 0 {
        return None;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .ok()
}

/// Runs `f` inside a pool sized by `threads`; sequentially when it is zero.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce(bool) -> R + Send) -> R {
    match pool(threads) {
        Some(p) => p.install(|| f(true)),
        None => f(false),
    }
}
