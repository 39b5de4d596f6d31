//! Deterministic parallel reductions over player indices.
//!
//! Players are split into fixed-size chunks; chunks are mapped in parallel
//! and the partial results are combined sequentially in chunk order, so the
//! floating-point result does not depend on the thread count.

use std::ops::Range;

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

pub(crate) fn reduce_chunks<T, M, C>(n: usize, map: M, init: T, combine: C) -> T
where
    T: Send,
    M: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T,
{
    let parts: Vec<T> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| map(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect();
    parts.into_iter().fold(init, combine)
}

/// Element-wise sum of per-chunk vectors of a fixed width.
pub(crate) fn sum_vectors<M>(n: usize, width: usize, map: M) -> Vec<f64>
where
    M: Fn(Range<usize>, &mut [f64]) + Sync,
{
    reduce_chunks(
        n,
        |r| {
            let mut acc = vec![0.0; width];
            map(r, &mut acc);
            acc
        },
        vec![0.0; width],
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )
}
