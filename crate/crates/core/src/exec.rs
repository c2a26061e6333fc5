//! Path-level data parallelism.
//!
//! Every Monte Carlo loop in the crate maps a pure function over path
//! indices and reduces the results in index order, so the `parallel` and
//! sequential code paths produce bit-identical numbers.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed chunk length for chunked reductions. Independent of the thread
/// count so that partial sums are always formed over the same paths.
pub const REDUCTION_CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    /// Evaluate `f` on `0..count`, returning results in index order.
    pub fn map<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..count).into_par_iter().map(f).collect(),
            _ => (0..count).map(f).collect(),
        }
    }

    /// Run `f` on every element of `items` mutably, with the element index.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t)),
            _ => items.iter_mut().enumerate().for_each(|(i, t)| f(i, t)),
        }
    }

    /// Run `f` over consecutive chunks of `len`-sized rows of a flat buffer.
    pub fn for_each_row<F>(self, data: &mut [f64], len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => data
                .par_chunks_mut(len)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
            _ => data.chunks_mut(len).enumerate().for_each(|(i, row)| f(i, row)),
        }
    }

    /// Like [`for_each_row`](Self::for_each_row), collecting one result per row.
    pub fn map_rows<T, F>(self, data: &mut [f64], len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &mut [f64]) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => data
                .par_chunks_mut(len)
                .enumerate()
                .map(|(i, row)| f(i, row))
                .collect(),
            _ => data.chunks_mut(len).enumerate().map(|(i, row)| f(i, row)).collect(),
        }
    }

    /// Sum `f(i)` over `0..count` as flat vectors of length `width`.
    ///
    /// Partial sums are formed over fixed chunks of [`REDUCTION_CHUNK`]
    /// indices and combined in chunk order.
    pub fn chunked_sum<F>(self, count: usize, width: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let chunks = count.div_ceil(REDUCTION_CHUNK);
        let partials = self.map(chunks, |c| {
            let mut acc = vec![0.0; width];
            let lo = c * REDUCTION_CHUNK;
            let hi = (lo + REDUCTION_CHUNK).min(count);
            for i in lo..hi {
                f(i, &mut acc);
            }
            acc
        });
        let mut total = vec![0.0; width];
        for p in &partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let out = Execution::default().map(1000, |i| i * 2);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 2 * i));
    }

    #[test]
    fn chunked_sum_is_bit_identical_across_modes() {
        let f = |i: usize, acc: &mut [f64]| {
            acc[0] += (i as f64).sin() * 1e-3;
            acc[1] += 1.0 / (1.0 + i as f64);
        };
        let a = Execution::Sequential.chunked_sum(5000, 2, f);
        let b = Execution::Parallel.chunked_sum(5000, 2, f);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }
}
