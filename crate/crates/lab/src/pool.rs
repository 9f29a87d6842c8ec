//! Rayon-backed block executor.

use std::ops::Range;

use anderson_core::exec::{blocks, BlockExecutor};
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs sample blocks on a dedicated rayon pool. Results come back in block
/// order, so the reduction is the same for every thread count.
pub struct Pool {
    inner: ThreadPool,
}

impl Pool {
    /// `threads = 0` lets rayon pick the count.
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let inner = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Pool { inner })
    }

    pub fn threads(&self) -> usize {
        self.inner.current_num_threads()
    }
}

impl BlockExecutor for Pool {
    fn map_blocks<T, F>(&self, total: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send,
    {
        let ranges: Vec<Range<u64>> = blocks(total).collect();
        self.inner.install(|| ranges.into_par_iter().map(f).collect())
    }
}
