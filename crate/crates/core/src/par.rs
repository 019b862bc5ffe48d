//! Replicate-level parallelism. With the `parallel` feature (default) work is
//! spread over a rayon pool; without it the same closures run sequentially.
//! Results are always returned in index order, so aggregation never depends
//! on scheduling.

/// Evaluate `f(0), …, f(len - 1)` and collect the results in order.
///
/// `workers` selects the pool size; `None` uses the global rayon pool and
/// `Some(1)` forces sequential execution.
pub fn map_indexed<T, F>(len: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match workers {
            Some(1) => (0..len).map(f).collect(),
            None => (0..len).into_par_iter().map(f).collect(),
            Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
                Err(e) => {
                    log::warn!("could not build a {w}-thread pool ({e}); running sequentially");
                    (0..len).map(f).collect()
                }
            },
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        (0..len).map(f).collect()
    }
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let seq = map_indexed(1000, Some(1), |i| i * i);
        assert_eq!(map_indexed(1000, None, |i| i * i), seq);
        assert_eq!(map_indexed(1000, Some(3), |i| i * i), seq);
    }
}
