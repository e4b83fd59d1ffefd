//! Execution drivers for the data-parallel kernels.
//!
//! With the default `parallel` feature the drivers fan work out over rayon;
//! without it they degrade to plain sequential loops with identical results.
//! Every caller collects per-item outputs in index order and reduces
//! sequentially, so results are bit-identical across thread counts and
//! between the two modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<U: Send>(n: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U>(n: usize, f: impl Fn(usize) -> U) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Sequential twin of [`map_indexed`], always available. The public
/// `*_seq` entry points and the benchmark suite run on this driver.
pub fn map_indexed_seq<U>(n: usize, f: impl Fn(usize) -> U) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Caps the rayon worker pool. No-op when the pool is already initialized
/// or the crate is built without the `parallel` feature.
pub fn configure_threads(jobs: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}
