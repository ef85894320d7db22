//! Data-parallel execution of independent work items.
//!
//! Benchmark cells, per-seed evaluations, and grid-search cells are
//! embarrassingly parallel: each item owns a derived seed and touches no
//! shared mutable state. [`map_items`] fans them out over rayon when the
//! `parallel` feature is enabled and degrades to a plain loop otherwise.
//!
//! Results are collected positionally, never appended in completion order,
//! so output is byte-identical regardless of thread count. Reductions over
//! floating-point sums are deliberately kept *inside* each item; only whole
//! items run concurrently.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving input order in the output.
#[cfg(not(feature = "parallel"))]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential reference path, always available so benchmarks can compare
/// the two executions within one build.
pub fn map_items_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs `f` under a bounded worker pool of `threads` workers. `None` keeps
/// the default pool; without the `parallel` feature the bound is moot since
/// execution is sequential.
#[cfg(feature = "parallel")]
pub fn with_thread_limit<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build worker pool")
            .install(f),
    }
}

/// Runs `f` directly; the sequential build has no pool to bound.
#[cfg(not(feature = "parallel"))]
pub fn with_thread_limit<R, F>(threads: Option<usize>, f: F) -> R
where
    F: FnOnce() -> R,
{
    let _ = threads;
    f()
}
