//! The shared worker pool. `MULTIVEC_THREADS` caps its size; results never
//! depend on the number of workers.

use std::sync::OnceLock;

use rayon::ThreadPool;

pub const THREADS_ENV: &str = "MULTIVEC_THREADS";

pub fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("failed to start worker pool")
    })
}
