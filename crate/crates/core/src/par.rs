//! Deterministic data-parallel helpers.
//!
//! With the `parallel` feature (default), the hot loops fan out over rayon;
//! without it they run sequentially. Reductions are always performed over
//! fixed-size chunks folded in index order, so results are bit-identical
//! whether or not the feature is enabled and regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic reductions. Large enough that per-chunk
/// work amortizes task overhead even on a couple of cores; partials stay
/// cheap to merge.
const CHUNK: usize = 8192;

/// Reductions have tens of flops per item, so forking only pays for large
/// inputs; below this the parallel path runs sequentially (same chunk
/// grouping, hence bit-identical results).
const PAR_FOLD_MIN: usize = 65_536;

/// Parallel (or sequential) map preserving input order.
pub fn map_collect<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential map with the same contract as [`map_collect`]; the benchmark
/// baseline for the parallel path.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

fn chunk_partials_seq<T, A, F>(items: &[T], f: &F) -> Vec<A>
where
    A: Accumulator,
    F: Fn(&T, &mut A),
{
    items
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = A::zero();
            for item in chunk {
                f(item, &mut acc);
            }
            acc
        })
        .collect()
}

/// Deterministic fold over items: per-chunk sequential accumulation, chunk
/// partials merged in index order.
pub fn fold<T: Sync, A, F>(items: &[T], f: F) -> A
where
    A: Accumulator + Send,
    F: Fn(&T, &mut A) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let partials: Vec<A> = if items.len() >= PAR_FOLD_MIN {
        items
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = A::zero();
                for item in chunk {
                    f(item, &mut acc);
                }
                acc
            })
            .collect()
    } else {
        chunk_partials_seq(items, &f)
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<A> = chunk_partials_seq(items, &f);

    let mut total = A::zero();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Sequential twin of [`fold`], same chunking so the result is identical.
pub fn fold_seq<T, A, F>(items: &[T], f: F) -> A
where
    A: Accumulator,
    F: Fn(&T, &mut A),
{
    let partials = chunk_partials_seq(items, &f);
    let mut total = A::zero();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Weighted-sum style accumulators.
pub trait Accumulator {
    fn zero() -> Self;
    fn merge(&mut self, other: Self);
}

impl Accumulator for f64 {
    fn zero() -> Self {
        0.0
    }
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

impl<const N: usize> Accumulator for [f64; N] {
    fn zero() -> Self {
        [0.0; N]
    }
    fn merge(&mut self, other: Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
}

/// Convenience: deterministic sum of f(item).
pub fn sum<T: Sync, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64 + Sync + Send,
{
    fold(items, |item, acc: &mut f64| *acc += f(item))
}

/// Sequential twin of [`sum`].
pub fn sum_seq<T, F>(items: &[T], f: F) -> f64
where
    F: Fn(&T) -> f64,
{
    fold_seq(items, |item, acc: &mut f64| *acc += f(item))
}

/// Populate `out[i] = f(i)` in parallel when enabled.
pub fn fill_indexed<U: Send, F>(out: &mut [U], f: F)
where
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_matches_sequential_twin_bitwise() {
        let items: Vec<f64> = (0..10_000).map(|i| (i as f64).sin() * 1e-3 + 1.0).collect();
        let a = sum(&items, |x| x * x + x.sqrt());
        let b = sum_seq(&items, |x| x * x + x.sqrt());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn array_accumulator() {
        let items: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        let total: [f64; 2] = fold(&items, |x, acc: &mut [f64; 2]| {
            acc[0] += x;
            acc[1] += x * 2.0;
        });
        let expect = 4999.0 * 5000.0 / 2.0;
        assert_eq!(total[0], expect);
        assert_eq!(total[1], 2.0 * expect);
    }

    #[test]
    fn map_preserves_order() {
        let items: Vec<usize> = (0..5000).collect();
        let mapped = map_collect(&items, |i| i * 3);
        for (i, v) in mapped.iter().enumerate() {
            assert_eq!(*v, i * 3);
        }
    }
}
