//! Thread-pool executor and wall clock for the core iteration hooks.

use std::time::Instant;

use rayon::prelude::*;
use stdd_core::iteration::{Clock, SubdomainExecutor};
use stdd_core::{Result, SpaceTimeField};

/// Runs the independent subdomain solves of an additive sweep on a pool of
/// at most `threads` workers. The core driver averages the results in
/// subdomain order, so the outcome does not depend on the thread count.
#[derive(Debug)]
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    pub fn new(threads: usize) -> std::result::Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl SubdomainExecutor for PoolExecutor {
    fn run_all(&self, q: usize, solve: &(dyn Fn(usize) -> Result<SpaceTimeField> + Sync)) -> Vec<Result<SpaceTimeField>> {
        self.pool.install(|| (0..q).into_par_iter().map(solve).collect())
    }
}

/// Milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> Option<f64> {
        Some(self.start.elapsed().as_secs_f64() * 1e3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stdd_core::TimeGrid;

    #[test]
    fn results_indexed_by_subdomain() {
        let ex = PoolExecutor::new(3).unwrap();
        assert_eq!(ex.threads(), 3);
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let out = ex.run_all(5, &|l| Ok(SpaceTimeField::from_fn(grid, 1, |_, _| l as f64)));
        for (l, r) in out.into_iter().enumerate() {
            assert_eq!(r.unwrap().values(), &[l as f64, l as f64]);
        }
    }

    #[test]
    fn clock_advances() {
        let c = WallClock::new();
        let a = c.now_ms().unwrap();
        assert!(c.now_ms().unwrap() >= a);
    }
}
