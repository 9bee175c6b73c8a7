//! Thread-pool executor for the refinement loop.

use anyhow::{Context, Result};
use darepc_core::darepc::Executor;
use rayon::prelude::*;

/// Maps on a private rayon pool; results come back in index order, so
/// output never depends on the worker count.
pub struct Pool(rayon::ThreadPool);

impl Pool {
    /// `jobs = 0` uses one worker per available core.
    pub fn new(jobs: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("building thread pool")?;
        Ok(Self(pool))
    }
}

impl Executor for Pool {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T> {
        let f = &f;
        self.0.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
