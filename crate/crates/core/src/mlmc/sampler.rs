//! Per-level sample generation with a scheduling-independent reduction.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::coupling::coupled_path_pair_with_factor;
use crate::error::{Error, Result};
use crate::model::{make_params, simulate_path, InitialCondition, Qoi, SchemeParams};
use crate::rng::{stream_for, StreamKey};
use crate::stats::LevelStats;

use super::hierarchy::{LevelHierarchy, LevelSpec};

/// Samples generated in parallel before being folded in index order.
const BLOCK: u64 = 1 << 15;

/// Draws `(F_l, F_{l-1})` for one level; `F_{-1} = 0` on the coarsest.
#[derive(Debug, Clone)]
pub struct LevelSampler {
    spec: LevelSpec,
    fine: SchemeParams,
    coarse: Option<(SchemeParams, usize, u64)>,
    qoi: Qoi,
    initial: InitialCondition,
    seed: u64,
}

impl LevelSampler {
    pub fn new(
        hierarchy: &LevelHierarchy,
        level: usize,
        qoi: Qoi,
        initial: InitialCondition,
        seed: u64,
    ) -> Result<Self> {
        let spec = *hierarchy
            .levels
            .get(level)
            .ok_or_else(|| Error::Config(format!("level {level} is not in the hierarchy")))?;
        let fine = make_params(hierarchy.epsilon, spec.dt)?;
        let coarse = match spec.refine_factor {
            None => None,
            Some(m) => {
                let prev = hierarchy.levels[level - 1];
                Some((make_params(hierarchy.epsilon, prev.dt)?, m, prev.n_steps))
            }
        };
        Ok(Self {
            spec,
            fine,
            coarse,
            qoi,
            initial,
            seed,
        })
    }

    pub fn spec(&self) -> &LevelSpec {
        &self.spec
    }

    /// Payoffs of sample `index`; the initial state is drawn first.
    pub fn sample(&self, index: u64) -> Result<(f64, f64)> {
        let mut draws = stream_for(StreamKey::new(self.seed, self.spec.index as u32, index));
        let start = self.initial.sample(&mut draws);
        match &self.coarse {
            None => {
                let end = simulate_path(start, &self.fine, self.spec.n_steps, &mut draws)?;
                Ok((self.qoi.eval(end.x), 0.0))
            }
            Some((coarse, m, n_coarse)) => {
                let (f, c) =
                    coupled_path_pair_with_factor(start, &self.fine, coarse, *m, *n_coarse, &mut draws)?;
                Ok((self.qoi.eval(f.x), self.qoi.eval(c.x)))
            }
        }
    }

    /// Adds samples `start..start + count` to `stats`, folding them in index
    /// order so the result does not depend on the worker count.
    pub fn accumulate(&self, start: u64, count: u64, pool: &ThreadPool, stats: &mut LevelStats) -> Result<()> {
        let end = start + count;
        let mut next = start;
        while next < end {
            let hi = (next + BLOCK).min(end);
            let block: Vec<(f64, f64)> =
                pool.install(|| (next..hi).into_par_iter().map(|i| self.sample(i)).collect::<Result<_>>())?;
            for (f, c) in block {
                stats.push(f, c);
            }
            next = hi;
        }
        Ok(())
    }
}

/// Builds a pool with `workers` threads, or rayon's default when `None`.
pub fn worker_pool(workers: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}
