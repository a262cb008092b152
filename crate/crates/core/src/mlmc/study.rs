//! Fixed-sample level studies: mean and variance of `F_l` and of the level
//! differences across a geometric hierarchy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InitialCondition, Qoi};

use super::adaptive::{run_fixed, DEFAULT_COST_CEILING};
use super::hierarchy::LevelHierarchy;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelStudyConfig {
    pub epsilon: f64,
    pub t_star: f64,
    /// Step size of the coarsest level.
    pub dt0: f64,
    pub refine: usize,
    /// Number of levels including the coarsest.
    pub levels: usize,
    pub samples_per_level: u64,
    pub qoi: Qoi,
    pub seed: u64,
    #[serde(skip)]
    pub workers: Option<usize>,
    pub cost_ceiling: u64,
    #[serde(skip)]
    pub initial: InitialCondition,
}

impl LevelStudyConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            t_star: 5.0,
            dt0: 2.5,
            refine: 2,
            levels: 10,
            samples_per_level: 100_000,
            qoi: Qoi::SquaredPosition,
            seed: 0,
            workers: None,
            cost_ceiling: DEFAULT_COST_CEILING,
            initial: InitialCondition::OriginFairSign,
        }
    }

    pub fn hierarchy(&self) -> Result<LevelHierarchy> {
        LevelHierarchy::geometric_from(self.epsilon, self.t_star, self.dt0, self.refine, self.levels)
    }

    /// Particle steps the study would take.
    pub fn particle_steps(&self) -> Result<u64> {
        let h = self.hierarchy()?;
        h.levels
            .iter()
            .try_fold(0u64, |acc, l| {
                l.steps_per_sample()
                    .checked_mul(self.samples_per_level)
                    .and_then(|s| acc.checked_add(s))
            })
            .ok_or_else(|| Error::Budget("step count overflows".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: usize,
    pub dt: f64,
    pub n_steps: u64,
    pub samples: u64,
    pub mean_fine: f64,
    pub var_fine: f64,
    pub stderr_fine: f64,
    pub mean_diff: f64,
    pub abs_mean_diff: f64,
    pub var_diff: f64,
    pub stderr_diff: f64,
}

/// Runs the study after checking the step budget.
pub fn level_study(config: &LevelStudyConfig) -> Result<Vec<StudyRow>> {
    if config.samples_per_level < 2 {
        return Err(Error::Config("samples_per_level must be >= 2".into()));
    }
    let steps = config.particle_steps()?;
    if steps > config.cost_ceiling {
        return Err(Error::Budget(format!(
            "level study needs {steps} particle steps, ceiling is {}",
            config.cost_ceiling
        )));
    }
    let h = config.hierarchy()?;
    let counts = vec![config.samples_per_level; h.len()];
    let stats = run_fixed(&h, &counts, config.qoi, config.initial, config.seed, config.workers)?;
    Ok(h.levels
        .iter()
        .zip(&stats)
        .map(|(spec, s)| StudyRow {
            level: spec.index,
            dt: spec.dt,
            n_steps: spec.n_steps,
            samples: s.n_samples(),
            mean_fine: s.fine.mean(),
            var_fine: s.fine.variance(),
            stderr_fine: s.fine.std_error(),
            mean_diff: s.diff.mean(),
            abs_mean_diff: s.diff.mean().abs(),
            var_diff: s.diff.variance(),
            stderr_diff: s.diff.std_error(),
        })
        .collect())
}

/// Least-squares slope of `log y` against `log dt`.
pub fn log_log_slope(dt: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = dt.iter().zip(y).map(|(d, v)| (d.ln(), v.ln())).collect();
    super::allocation::least_squares_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_hierarchy_halves_from_two_and_a_half() {
        let c = LevelStudyConfig::new(1.0);
        let h = c.hierarchy().unwrap();
        assert_eq!(h.levels[0].dt, 2.5);
        assert_eq!(h.levels[0].n_steps, 2);
        assert_relative_eq!(h.levels[3].dt, 0.3125);
        assert_eq!(h.len(), 10);
    }

    #[test]
    fn budget_checked_before_running() {
        let mut c = LevelStudyConfig::new(1.0);
        c.cost_ceiling = 1000;
        assert!(matches!(level_study(&c), Err(Error::Budget(_))));
    }

    #[test]
    fn small_study_has_wide_errors() {
        let mut c = LevelStudyConfig::new(0.5);
        c.samples_per_level = 10;
        c.levels = 4;
        c.workers = Some(1);
        let rows = level_study(&c).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert_eq!(r.samples, 10);
            assert!(r.stderr_diff.is_finite() && r.stderr_diff >= 0.0);
            assert!(r.var_fine >= 0.0);
        }
        assert_eq!(rows[0].mean_diff, rows[0].mean_fine);
    }

    #[test]
    fn slope_of_power_law() {
        let dt = [1.0, 0.5, 0.25];
        let y: Vec<f64> = dt.iter().map(|d: &f64| 3.0 * d.powf(1.5)).collect();
        assert_relative_eq!(log_log_slope(&dt, &y), 1.5, max_relative = 1e-12);
    }
}
