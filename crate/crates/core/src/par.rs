//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run the same closures in order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Collects `f(i)` for `i in 0..n`, preserving index order.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Applies `f` to every `chunk`-sized run of `data`.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk).for_each(f);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).for_each(f);
    }
}

/// Maximum of `f(i)` over `0..n`; `0.0` for an empty range.
pub(crate) fn max_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(0.0, f64::max)
    }
}

/// Whether this build dispatches to rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
