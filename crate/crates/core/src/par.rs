//! Per-path fan-out. Output order always follows path ids.

use alloc::vec::Vec;

use crate::Result;

#[cfg(feature = "parallel")]
pub(crate) fn map_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_paths<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Like [`map_paths`], reporting the error of the lowest failing path id.
pub(crate) fn try_map_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_paths(n, f).into_iter().collect()
}
