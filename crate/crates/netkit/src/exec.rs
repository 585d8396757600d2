//! Data-parallel execution of sweep and sampling workloads.
//!
//! With the `parallel` feature (default) work is spread over the global rayon
//! pool; without it everything runs sequentially. Results are assembled in
//! input order in both cases, so the two modes are numerically identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for a mapped workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    /// Force sequential execution regardless of features.
    Sequential,
}

/// Caps the rayon pool at `n` threads. Must be called before the pool is
/// first used; later calls are ignored. No-op in sequential builds.
pub fn configure_threads(n: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_with(Mode::Auto, items, f)
}

/// [`map`] with an explicit execution mode.
pub fn map_with<T, U, F>(mode: Mode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        Mode::Sequential => items.iter().map(f).collect(),
        Mode::Auto => {
            #[cfg(feature = "parallel")]
            {
                items.par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.iter().map(f).collect()
            }
        }
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    map_range_with(Mode::Auto, n, f)
}

/// [`map_range`] with an explicit execution mode.
pub fn map_range_with<U, F>(mode: Mode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        Mode::Sequential => (0..n).map(f).collect(),
        Mode::Auto => {
            #[cfg(feature = "parallel")]
            {
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_map_preserves_order() {
        let items: Vec<usize> = (0..1000).collect();
        let out = map(&items, |&i| i * 2);
        assert_eq!(out, (0..1000).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn test_modes_agree() {
        let items: Vec<f64> = (0..257).map(|i| i as f64 * 0.37).collect();
        let a = map_with(Mode::Auto, &items, |x| x.sin() * x.cos());
        let b = map_with(Mode::Sequential, &items, |x| x.sin() * x.cos());
        assert_eq!(a, b);
    }

    #[test]
    fn test_map_range() {
        assert_eq!(map_range(4, |i| i + 1), vec![1, 2, 3, 4]);
        assert!(map_range(0, |i| i).is_empty());
    }
}
