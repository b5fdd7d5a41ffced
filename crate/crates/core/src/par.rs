//! Element-loop helpers. With the `parallel` feature the maps run on the
//! rayon pool, otherwise sequentially. Results always come back in index
//! order and every reduction in the crate folds them sequentially, so output
//! is bit-identical for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the sequential path is used even with `parallel`.
const MIN_PARALLEL_LEN: usize = 256;

pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n >= MIN_PARALLEL_LEN {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fills `out[i] = f(i)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= MIN_PARALLEL_LEN {
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        return;
    }
    out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
}

/// Whether element loops can use more than one worker in this build.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
