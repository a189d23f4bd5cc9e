//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) index-mapped work runs on the rayon
//! pool; without it, or inside [`sequential`], the same closures run in a
//! plain loop. Results are always collected in index order so any reduction
//! over them is independent of scheduling.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with all helpers in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
fn forced_sequential() -> bool {
    FORCE_SEQUENTIAL.with(Cell::get)
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !forced_sequential() && n > 1 {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_range`]; returns the error of the lowest failing
/// index.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Pairwise sum with a shape fixed by the length alone.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            tree_sum(a) + tree_sum(b)
        }
    }
}

/// Element-wise pairwise sum of equal-length vectors, same tree shape as
/// [`tree_sum`].
pub fn tree_sum_vecs(values: &[Vec<f64>]) -> Vec<f64> {
    match values.len() {
        0 => Vec::new(),
        1 => values[0].clone(),
        n => {
            let (a, b) = values.split_at(n / 2);
            let mut left = tree_sum_vecs(a);
            let right = tree_sum_vecs(b);
            for (l, r) in left.iter_mut().zip(&right) {
                *l += r;
            }
            left
        }
    }
}

pub fn worker_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        if !forced_sequential() {
            return rayon::current_num_threads();
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_is_ordered() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        let s = sequential(|| map_range(100, |i| i * i));
        assert_eq!(v, s);
        assert!(sequential(worker_count) == 1);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> = try_map_range(10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }

    #[test]
    fn tree_sum_matches_exact_small_cases() {
        assert_eq!(tree_sum(&[]), 0.0);
        assert_eq!(tree_sum(&[1.5]), 1.5);
        assert_eq!(tree_sum(&[1.0, 2.0, 3.0, 4.0]), 10.0);
        let v = tree_sum_vecs(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(v, vec![9.0, 12.0]);
    }
}
