//! Order-preserving data-parallel helpers.
//!
//! Every helper returns results in input order regardless of thread
//! scheduling, so parallel and sequential builds produce bit-identical
//! output. Reductions that would depend on float summation order are done
//! sequentially by the callers on the collected vectors.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, collecting results in input order.
#[cfg(feature = "parallel")]
pub fn map_slice<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> T + Sync + Send) -> Vec<T> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<I, T>(items: &[I], f: impl Fn(&I) -> T) -> Vec<T> {
    items.iter().map(f).collect()
}

/// Sequential reference version of [`map_indexed`], kept available in all
/// builds so benchmarks can compare the two code paths directly.
pub fn map_indexed_seq<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}
