//! Adaptive multilevel estimation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{InitialCondition, Qoi};
use crate::stats::LevelStats;

use super::allocation::{allocate_samples, bias_estimate, WARMUP_SAMPLES};
use super::hierarchy::{build_hierarchy, LevelHierarchy, Strategy};
use super::report::{LevelRow, LevelTable, MlmcReport};
use super::sampler::{worker_pool, LevelSampler};

/// Default cap on particle steps per experiment.
pub const DEFAULT_COST_CEILING: u64 = 200_000_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlmcConfig {
    pub epsilon: f64,
    pub t_star: f64,
    pub qoi: Qoi,
    /// Refinement factor `M`.
    pub refine: usize,
    pub strategy: Strategy,
    /// Root-mean-square error target `E`.
    pub rmse: f64,
    pub seed: u64,
    /// Most levels the hierarchy may grow to.
    pub max_levels: usize,
    pub initial_levels: usize,
    pub warmup: u64,
    /// Weak order `a` of the bias test. `Some(1.0)` gives the two-level rule
    /// `max(|Y_{L-1}|/M, |Y_L|)/(M-1) <= E/sqrt(2)`; `None` fits `a` from the
    /// level means and looks back three levels.
    pub weak_order: Option<f64>,
    /// Worker threads; `None` uses every available core.
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Cap on the total number of particle steps.
    pub cost_ceiling: u64,
    #[serde(skip)]
    pub initial: InitialCondition,
}

impl MlmcConfig {
    pub fn new(epsilon: f64, t_star: f64, rmse: f64) -> Self {
        Self {
            epsilon,
            t_star,
            qoi: Qoi::SquaredPosition,
            refine: 2,
            strategy: Strategy::Geometric,
            rmse,
            seed: 0,
            max_levels: 20,
            initial_levels: 3,
            warmup: WARMUP_SAMPLES,
            weak_order: Some(1.0),
            workers: None,
            cost_ceiling: DEFAULT_COST_CEILING,
            initial: InitialCondition::OriginFairSign,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rmse > 0.0 && self.rmse.is_finite()) {
            return domain(format!("rmse must be positive, got {}", self.rmse));
        }
        if self.refine < 2 {
            return domain("adaptive runs need M >= 2");
        }
        if self.initial_levels == 0 || self.initial_levels > self.max_levels {
            return domain(format!(
                "initial_levels = {} must lie in 1..=max_levels ({})",
                self.initial_levels, self.max_levels
            ));
        }
        if self.warmup < 2 {
            return domain("warm-up needs at least 2 samples per level");
        }
        if let Some(a) = self.weak_order {
            if !(a > 0.0 && a.is_finite()) {
                return domain(format!("weak order must be positive, got {a}"));
            }
        }
        Ok(())
    }
}

/// Runs the adaptive estimator until the bias and variance targets are met.
///
/// Each round samples the outstanding counts, re-estimates every level,
/// re-allocates, and, once no level is short by more than 1% of its
/// samples, tests the extrapolated bias against `E / sqrt(2)`, adding a
/// finer level with a warm-up batch while the test fails.
pub fn run_adaptive(config: &MlmcConfig) -> Result<MlmcReport> {
    config.validate()?;
    let pool = worker_pool(config.workers)?;
    let mut hier = build_hierarchy(
        config.strategy,
        config.epsilon,
        config.t_star,
        config.refine,
        config.initial_levels,
    )?;
    let mut samplers = Vec::new();
    for l in 0..hier.len() {
        samplers.push(sampler(&hier, l, config)?);
    }
    let mut stats = vec![LevelStats::default(); hier.len()];
    let mut pending = vec![config.warmup; hier.len()];
    let tolerance = config.rmse / 2f64.sqrt();
    let mut particle_steps = 0u64;
    let mut rounds = 0;

    loop {
        rounds += 1;
        let round_steps = pending
            .iter()
            .zip(&hier.levels)
            .try_fold(0u64, |acc, (&n, spec)| {
                n.checked_mul(spec.steps_per_sample()).and_then(|s| acc.checked_add(s))
            })
            .unwrap_or(u64::MAX);
        if particle_steps.saturating_add(round_steps) > config.cost_ceiling {
            return Err(Error::Budget(format!(
                "next round needs {round_steps} particle steps after {particle_steps}, ceiling is {}",
                config.cost_ceiling
            )));
        }
        for (l, &n) in pending.iter().enumerate() {
            if n > 0 {
                samplers[l].accumulate(stats[l].n_samples(), n, &pool, &mut stats[l])?;
            }
        }
        particle_steps += round_steps;

        let var_cost: Vec<(f64, f64)> = stats
            .iter()
            .zip(&hier.levels)
            .map(|(s, spec)| (s.diff.variance(), spec.cost_per_sample))
            .collect();
        let target = allocate_samples(config.rmse, &var_cost, config.warmup)?;
        pending = target
            .iter()
            .zip(&stats)
            .map(|(&t, s)| t.saturating_sub(s.n_samples()))
            .collect();

        let nearly_done = pending
            .iter()
            .zip(&stats)
            .all(|(&d, s)| d as f64 <= 0.01 * s.n_samples() as f64);
        if !nearly_done {
            continue;
        }
        let means: Vec<f64> = stats.iter().map(|s| s.diff.mean()).collect();
        let factors: Vec<Option<usize>> = hier.levels.iter().map(|l| l.refine_factor).collect();
        let bias = bias_estimate(&means, &factors, config.refine, config.weak_order);
        let converged = bias.is_some_and(|b| b.remaining <= tolerance);
        if converged {
            if pending.iter().all(|&d| d == 0) {
                let b = bias.expect("converged implies an estimate");
                return Ok(report(config, &hier, &stats, b.remaining, tolerance, b.weak_order, rounds, particle_steps));
            }
            continue;
        }
        if hier.len() >= config.max_levels {
            let table = table(config, &hier, &stats);
            return Err(Error::Budget(format!(
                "no bias convergence within {} levels (estimate {}, remaining bias {:?} > {tolerance})",
                config.max_levels,
                table.estimate,
                bias.map(|b| b.remaining)
            )));
        }
        hier.push_finer()?;
        samplers.push(sampler(&hier, hier.len() - 1, config)?);
        stats.push(LevelStats::default());
        pending.push(config.warmup);
    }
}

fn sampler(hier: &LevelHierarchy, level: usize, config: &MlmcConfig) -> Result<LevelSampler> {
    LevelSampler::new(hier, level, config.qoi, config.initial, config.seed)
}

fn table(config: &MlmcConfig, hier: &LevelHierarchy, stats: &[LevelStats]) -> LevelTable {
    let rows = hier
        .levels
        .iter()
        .zip(stats)
        .map(|(spec, s)| LevelRow::from_stats(spec, s))
        .collect();
    LevelTable::from_rows(config.rmse, rows)
}

#[allow(clippy::too_many_arguments)]
fn report(
    config: &MlmcConfig,
    hier: &LevelHierarchy,
    stats: &[LevelStats],
    bias: f64,
    tolerance: f64,
    weak_order: f64,
    rounds: usize,
    particle_steps: u64,
) -> MlmcReport {
    MlmcReport {
        epsilon: config.epsilon,
        t_star: config.t_star,
        qoi: config.qoi,
        refine: config.refine,
        strategy: config.strategy,
        seed: config.seed,
        table: table(config, hier, stats),
        variance_budget: config.rmse * config.rmse / 2.0,
        bias_estimate: bias,
        bias_tolerance: tolerance,
        weak_order,
        converged: true,
        rounds,
        particle_steps,
        base_dt_requested: hier.base_dt_requested,
        base_dt_used: hier.base_dt_used,
    }
}

/// Samples a fixed hierarchy with a fixed count per level.
pub fn run_fixed(
    hier: &LevelHierarchy,
    samples: &[u64],
    qoi: Qoi,
    initial: InitialCondition,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<LevelStats>> {
    if samples.len() != hier.len() {
        return Err(Error::Config(format!(
            "{} sample counts for {} levels",
            samples.len(),
            hier.len()
        )));
    }
    let pool = worker_pool(workers)?;
    let mut out = Vec::with_capacity(hier.len());
    for (l, &n) in samples.iter().enumerate() {
        let s = LevelSampler::new(hier, l, qoi, initial, seed)?;
        let mut stats = LevelStats::default();
        s.accumulate(0, n, &pool, &mut stats)?;
        out.push(stats);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(rmse: f64) -> MlmcConfig {
        let mut c = MlmcConfig::new(0.5, 0.5, rmse);
        c.seed = 11;
        c.workers = Some(2);
        c
    }

    #[test]
    fn loose_target_stays_at_warmup() {
        let r = run_adaptive(&quick(10.0)).unwrap();
        assert!(r.converged);
        assert_eq!(r.table.rows.len(), 3);
        assert!(r.table.rows.iter().all(|row| row.samples == 40));
        assert_eq!(r.rounds, 1);
    }

    #[test]
    fn meets_variance_budget_and_totals() {
        let r = run_adaptive(&quick(0.05)).unwrap();
        assert!(r.converged);
        assert!(r.bias_estimate <= r.bias_tolerance);
        let rows = &r.table.rows;
        let v: f64 = rows.iter().map(|x| x.var_diff / x.samples as f64).sum();
        assert!((v - r.table.estimator_variance).abs() <= 1e-12 * v);
        // allocation is recomputed after the last round, so the budget holds up to 1%
        assert!(r.table.estimator_variance <= r.variance_budget * 1.02, "{} > {}", r.table.estimator_variance, r.variance_budget);
        let cost: f64 = rows.iter().map(|x| x.samples as f64 * x.cost_per_sample).sum();
        assert_eq!(cost, r.table.total_cost);
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let mut a = quick(0.05);
        a.workers = Some(1);
        let mut b = quick(0.05);
        b.workers = Some(3);
        assert_eq!(run_adaptive(&a).unwrap(), run_adaptive(&b).unwrap());
    }

    #[test]
    fn level_cap_is_a_budget_error() {
        let mut c = quick(0.1);
        c.max_levels = 4;
        // a vanishing weak order makes the extrapolated bias enormous
        c.weak_order = Some(1e-3);
        let err = run_adaptive(&c).unwrap_err();
        assert!(matches!(err, Error::Budget(ref m) if m.contains("4 levels")), "{err}");
    }

    #[test]
    fn cost_ceiling_is_a_budget_error() {
        let mut c = quick(0.05);
        c.cost_ceiling = 100;
        assert!(matches!(run_adaptive(&c), Err(Error::Budget(_))));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(run_adaptive(&quick(0.0)).is_err());
        let mut c = quick(0.1);
        c.refine = 1;
        assert!(run_adaptive(&c).is_err());
        let mut c = quick(0.1);
        c.initial_levels = 30;
        assert!(run_adaptive(&c).is_err());
    }

    #[test]
    fn fixed_run_checks_lengths() {
        let h = build_hierarchy(Strategy::Geometric, 0.5, 0.5, 2, 2).unwrap();
        assert!(run_fixed(&h, &[10], Qoi::SquaredPosition, InitialCondition::default(), 0, Some(1)).is_err());
        let s = run_fixed(&h, &[10, 20], Qoi::SquaredPosition, InitialCondition::default(), 0, Some(1)).unwrap();
        assert_eq!(s[1].n_samples(), 20);
    }
}
