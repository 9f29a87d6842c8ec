//! Block scheduling for Monte Carlo loops.

use alloc::vec::Vec;
use core::ops::Range;

/// Samples per block. Fixed so that the reduction tree depends only on the
/// sample count, never on the executor.
pub const BLOCK_SIZE: u64 = 256;

/// Runs a function over consecutive blocks of sample indices and returns the
/// per-block results in block order.
pub trait BlockExecutor: Sync {
    fn map_blocks<T, F>(&self, total: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send;
}

/// Runs blocks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BlockExecutor for Sequential {
    fn map_blocks<T, F>(&self, total: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send,
    {
        blocks(total).map(f).collect()
    }
}

/// The block decomposition of `0..total`.
pub fn blocks(total: u64) -> impl Iterator<Item = Range<u64>> + Clone {
    let n = total.div_ceil(BLOCK_SIZE);
    (0..n).map(move |b| {
        let start = b * BLOCK_SIZE;
        start..(start + BLOCK_SIZE).min(total)
    })
}
