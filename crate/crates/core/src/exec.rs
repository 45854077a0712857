//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, so reductions performed by
//! the caller over the returned `Vec` are bit-identical whichever mode ran.

/// How a batch workload is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon global pool. Without the `parallel` feature this is the
    /// same as [`Exec::Sequential`].
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_ordered<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}
