//! Thread-pool sizing.
//!
//! All parallel sections run on one global rayon pool whose width is capped
//! by the `NLP_THREADS` environment variable (unset or unparsable means the
//! rayon default). Parallel work always produces per-index results that are
//! reduced in a fixed order, so outputs are byte-identical regardless of the
//! thread count.

use once_cell::sync::Lazy;

static POOL: Lazy<rayon::ThreadPool> = Lazy::new(|| {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("NLP_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                builder = builder.num_threads(n);
            }
        }
    }
    builder.build().expect("failed to build thread pool")
});

/// Run `f` inside the capped global pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    POOL.install(f)
}

/// Number of worker threads in the capped pool.
pub fn current_threads() -> usize {
    POOL.current_num_threads()
}
