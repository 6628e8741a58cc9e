//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon; without
//! it they run inline. Either way the caller sees results in index order,
//! so reductions that fold the returned vector sequentially are bit-identical
//! across thread counts, across the feature flag, and across runs. Benches
//! flip [`force_sequential`] at runtime to compare both paths in one binary.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path even when compiled with `parallel`.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_sequential() -> bool {
    !cfg!(feature = "parallel") || FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Cap rayon's worker threads from the `PRISMGS_THREADS` env var.
///
/// No-op if the variable is unset/unparsable or a global pool already exists.
pub fn init_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("PRISMGS_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}

/// Map `0..n` to a vector, in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        return (0..n).into_par_iter().map(|i| f(i)).collect();
    }
    (0..n).map(f).collect()
}

/// Mutate disjoint equal-size chunks of `data`, one call per chunk index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Sum `f(i)` for `i in 0..n` with a fixed (index-order) reduction.
pub fn sum_indexed<T, F>(n: usize, zero: T, f: F) -> T
where
    T: Send + Sync + std::ops::Add<Output = T> + Copy,
    F: Fn(usize) -> T + Sync,
{
    // Chunked so the parallel path does not allocate one element per index.
    const CHUNK: usize = 256;
    let n_chunks = n.div_ceil(CHUNK);
    let partials = map_indexed(n_chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut acc = zero;
        for i in lo..hi {
            acc = acc + f(i);
        }
        acc
    });
    partials.into_iter().fold(zero, |a, b| a + b)
}
