//! Execution-mode facade over rayon.
//!
//! Everything data-parallel in this crate (fans of geodesics, grid tiles,
//! convolution outputs, sweep points) goes through these helpers so that the
//! same code runs with or without the `parallel` feature, and so benches can
//! compare both paths in a single build. Reductions are always performed
//! sequentially over collected, index-ordered buffers: results are bitwise
//! identical across modes and across runs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to execute a data-parallel region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Use the rayon thread pool when the `parallel` feature is enabled,
    /// otherwise fall back to sequential execution.
    #[default]
    Parallel,
    /// Force sequential execution even when rayon is available.
    Sequential,
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => (0..n).map(f).collect(),
        ExecMode::Sequential => (0..n).map(f).collect(),
    }
}

/// Map `f` over a slice, collecting results in order.
pub fn map_slice<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => items.par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => items.iter().map(f).collect(),
        ExecMode::Sequential => items.iter().map(f).collect(),
    }
}

/// Fill `out[i] = f(i)` in place.
pub fn fill_indexed<T, F>(mode: ExecMode, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
        }
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = f(i);
            }
        }
        ExecMode::Sequential => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = f(i);
            }
        }
    }
}

/// Deterministic sum: map in parallel, reduce sequentially in index order.
pub fn sum_indexed<F>(mode: ExecMode, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(mode, n, f).into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sin() * 1e-3 + i as f64;
        let a = map_indexed(ExecMode::Parallel, 1000, f);
        let b = map_indexed(ExecMode::Sequential, 1000, f);
        assert_eq!(a, b);
        let sa = sum_indexed(ExecMode::Parallel, 1000, f);
        let sb = sum_indexed(ExecMode::Sequential, 1000, f);
        assert_eq!(sa.to_bits(), sb.to_bits());
    }
}
