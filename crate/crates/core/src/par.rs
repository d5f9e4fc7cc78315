//! Thin switch between rayon and a serial loop.

/// `(0..n).map(f).collect()`, in parallel when the `parallel` feature is on.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sizes the global worker pool. Only the first call has an effect.
#[cfg(feature = "parallel")]
pub fn set_threads(k: usize) -> crate::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| crate::Error::InvalidParameter(format!("thread pool: {e}")))
}
