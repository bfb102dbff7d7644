//! Data-parallel helpers with a sequential fallback.
//!
//! Work is cut into chunks whose boundaries depend only on the index range,
//! and partial results come back in chunk order. Reducing them left to right
//! gives bit-identical sums for any thread count.

use std::ops::Range;

/// Sample indices handled by one task.
pub const DEFAULT_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to `Sequential` when the crate is built without `parallel`.
    #[default]
    Parallel,
}

fn chunks(range: Range<u64>, chunk: u64) -> Vec<Range<u64>> {
    let chunk = chunk.max(1);
    let mut out =
        Vec::with_capacity(((range.end.saturating_sub(range.start)) / chunk + 1) as usize);
    let mut start = range.start;
    while start < range.end {
        let end = (start + chunk).min(range.end);
        out.push(start..end);
        start = end;
    }
    out
}

/// Applies `f` to consecutive sub-ranges of `range` and returns the results
/// in range order.
pub fn map_chunks<T, F>(range: Range<u64>, chunk: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let parts = chunks(range, chunk);
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            parts.into_par_iter().map(f).collect()
        }
        _ => parts.into_iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indices<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}
