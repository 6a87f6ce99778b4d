//! Index-ordered map over independent runs: rayon when the `parallel`
//! feature is on, a plain loop otherwise.

/// How many worker threads to use; `None` lets rayon decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub Option<usize>);

impl Workers {
    pub fn sequential() -> Self {
        Workers(Some(1))
    }
}

/// Evaluates `f(0), ..., f(count - 1)` and returns the results in index order.
pub fn map_indexed<T, F>(count: usize, workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers.0 == Some(1) || count <= 1 {
        return (0..count).map(f).collect();
    }
    run(count, workers, f)
}

#[cfg(feature = "parallel")]
fn run<T, F>(count: usize, workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let work = || (0..count).into_par_iter().map(&f).collect();
    match workers.0 {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(work),
            Err(e) => {
                log::warn!("could not build a {k}-thread pool ({e}); using the global pool");
                work()
            }
        },
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<T, F>(count: usize, _workers: Workers, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let out = map_indexed(100, Workers(Some(4)), |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(map_indexed(3, Workers::sequential(), |i| i), vec![0, 1, 2]);
        assert!(map_indexed(0, Workers::default(), |i| i).is_empty());
    }
}
