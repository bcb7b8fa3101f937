//! Data-parallel map helpers with a sequential fallback.
//!
//! Every embarrassingly parallel loop in the crate (ε-sweeps, hyperparameter
//! search, transfer matrices, Rashomon grids) goes through [`map_indexed`].
//! With the `parallel` feature (default) it runs on the current rayon pool;
//! without it, it degrades to plain iteration. Callers derive any randomness
//! from the task index via [`mix_seed`], so outputs do not depend on the
//! schedule or the pool size.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items` with the element index, in parallel when enabled.
/// Output order always matches input order.
pub fn map_indexed<T, O, F>(items: &[T], f: F) -> Vec<O>
where
    T: Sync,
    O: Send,
    F: Fn(usize, &T) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(items, f)
    }
}

/// Sequential twin of [`map_indexed`]; also the baseline in the benches.
pub fn map_indexed_seq<T, O, F>(items: &[T], f: F) -> Vec<O>
where
    F: Fn(usize, &T) -> O,
{
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Derives a per-task seed from a base seed and a task index.
/// SplitMix64 finalizer; stable across platforms.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(0x94d0_49bb_1331_11eb);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
