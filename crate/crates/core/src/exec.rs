//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature (default) the loops run on the rayon global
//! pool; without it, `Execution::Parallel` degrades to sequential iteration.
//! Every loop here maps an index to an independent result and collects in
//! index order, so outputs do not depend on the worker count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub(crate) fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] with per-worker scratch state.
pub(crate) fn map_indexed_init<S, T, I, F>(exec: Execution, n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map_init(&init, |s, i| f(s, i)).collect();
    }
    let _ = exec;
    let mut state = init();
    (0..n).map(|i| f(&mut state, i)).collect()
}

/// Process fixed-size row chunks of `data` in place, with per-worker scratch.
pub(crate) fn for_each_row_init<T, S, I, F>(
    exec: Execution,
    data: &mut [T],
    row_len: usize,
    init: I,
    f: F,
) where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each_init(&init, |s, (i, row)| f(s, i, row));
        return;
    }
    let _ = exec;
    let mut state = init();
    for (i, row) in data.chunks_mut(row_len).enumerate() {
        f(&mut state, i, row);
    }
}

/// Pairwise (tree) reduction in a fixed order.
pub(crate) fn pairwise_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let a = map_indexed(Execution::Sequential, 100, |i| i * i);
        let b = map_indexed(Execution::Parallel, 100, |i| i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_order_is_fixed() {
        let v: Vec<f64> = (1..=7).map(|i| i as f64).collect();
        assert_eq!(pairwise_reduce(v, |a, b| a + b), Some(28.0));
        assert_eq!(pairwise_reduce(Vec::<f64>::new(), |a, b| a + b), None);
    }
}
