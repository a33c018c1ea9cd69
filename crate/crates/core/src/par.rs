//! Data-parallel fan-out with a sequential fallback.
//!
//! With the `parallel` feature the `map_*` helpers run on rayon's global
//! pool; without it they run in order on the calling thread. Results are
//! always returned in input order, so seeded experiments produce identical
//! output either way.

/// Applies `f` to `0..n`, collecting results in index order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indices_parallel(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indices_sequential(n, f)
    }
}

/// Applies `f` to every item of `items`, collecting results in order.
pub fn map_items<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_indices(items.len(), |i| f(&items[i]))
}

pub fn map_indices_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indices_parallel<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
