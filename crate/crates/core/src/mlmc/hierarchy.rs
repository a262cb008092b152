//! Level hierarchies and the cost model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// How the coarsest levels are laid out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `dt_l = eps^2 M^-l`.
    #[default]
    Geometric,
    /// A single-step level `dt_0 = t*` followed by the geometric sequence.
    CoarseHorizon,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Geometric => "geometric",
            Strategy::CoarseHorizon => "coarse-horizon",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" | "1" => Ok(Strategy::Geometric),
            "coarse-horizon" | "2" => Ok(Strategy::CoarseHorizon),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected geometric or coarse-horizon)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub index: usize,
    pub dt: f64,
    pub n_steps: u64,
    /// `dt_{l-1} / dt_l`; `None` on the coarsest level.
    pub refine_factor: Option<usize>,
    /// Work per sample in units of one path with `dt = eps^2`.
    pub cost_per_sample: f64,
}

impl LevelSpec {
    /// Particle steps taken by one sample (both paths of a coupled pair).
    pub fn steps_per_sample(&self) -> u64 {
        match self.refine_factor {
            None => self.n_steps,
            Some(m) => self.n_steps + self.n_steps / m as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelHierarchy {
    pub epsilon: f64,
    pub t_star: f64,
    /// Refinement factor between consecutive geometric levels.
    pub refine: usize,
    pub levels: Vec<LevelSpec>,
    /// Step size asked for on the first geometric level.
    pub base_dt_requested: f64,
    /// Step size actually used there, `t* / N` with integer `N`.
    pub base_dt_used: f64,
}

/// Rounds `t_star / dt` up to an integer, treating near-integers as exact.
pub fn steps_for(t_star: f64, dt: f64) -> Result<u64> {
    if !(t_star > 0.0 && t_star.is_finite()) {
        return domain(format!("t_star must be positive and finite, got {t_star}"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return domain(format!("dt must be positive and finite, got {dt}"));
    }
    let ratio = t_star / dt;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    if n > u64::MAX as f64 / 4.0 {
        return domain(format!("t_star / dt = {ratio} steps is not representable"));
    }
    Ok((n as u64).max(1))
}

/// Cost of one sample relative to a path with `dt = eps^2` over `[0, t*]`.
pub fn cost_model(n_steps: u64, coarse_steps: Option<u64>, epsilon: f64, t_star: f64) -> f64 {
    (n_steps + coarse_steps.unwrap_or(0)) as f64 * epsilon * epsilon / t_star
}

impl LevelHierarchy {
    /// Geometric hierarchy starting at `dt0` (rounded to divide `t_star`).
    pub fn geometric_from(
        epsilon: f64,
        t_star: f64,
        dt0: f64,
        refine: usize,
        n_levels: usize,
    ) -> Result<Self> {
        check_common(epsilon, refine, n_levels)?;
        let n0 = steps_for(t_star, dt0)?;
        let mut h = Self {
            epsilon,
            t_star,
            refine,
            levels: Vec::with_capacity(n_levels),
            base_dt_requested: dt0,
            base_dt_used: t_star / n0 as f64,
        };
        h.push_level(n0, None);
        while h.levels.len() < n_levels {
            h.push_finer()?;
        }
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn finest(&self) -> &LevelSpec {
        self.levels.last().expect("hierarchy has at least one level")
    }

    /// Appends the level `dt_{L+1} = dt_L / M`.
    pub fn push_finer(&mut self) -> Result<&LevelSpec> {
        let n = self
            .finest()
            .n_steps
            .checked_mul(self.refine as u64)
            .ok_or_else(|| Error::Budget("step count overflow while refining".into()))?;
        self.push_level(n, Some(self.refine));
        Ok(self.finest())
    }

    fn push_level(&mut self, n_steps: u64, refine_factor: Option<usize>) {
        let coarse_steps = refine_factor.map(|m| n_steps / m as u64);
        self.levels.push(LevelSpec {
            index: self.levels.len(),
            dt: self.t_star / n_steps as f64,
            n_steps,
            refine_factor,
            cost_per_sample: cost_model(n_steps, coarse_steps, self.epsilon, self.t_star),
        });
    }

    /// Cost of one single-level sample at the finest step.
    pub fn finest_path_cost(&self) -> f64 {
        cost_model(self.finest().n_steps, None, self.epsilon, self.t_star)
    }
}

fn check_common(epsilon: f64, refine: usize, n_levels: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return domain(format!("epsilon must be positive and finite, got {epsilon}"));
    }
    if refine == 0 {
        return domain("refinement factor M must be >= 1");
    }
    if n_levels == 0 {
        return domain("a hierarchy needs at least one level");
    }
    Ok(())
}

/// Builds the first `n_levels` levels of a hierarchy.
pub fn build_hierarchy(
    strategy: Strategy,
    epsilon: f64,
    t_star: f64,
    refine: usize,
    n_levels: usize,
) -> Result<LevelHierarchy> {
    check_common(epsilon, refine, n_levels)?;
    let eps2 = epsilon * epsilon;
    match strategy {
        Strategy::Geometric => LevelHierarchy::geometric_from(epsilon, t_star, eps2, refine, n_levels),
        Strategy::CoarseHorizon => {
            let n1 = steps_for(t_star, eps2)?;
            let mut h = LevelHierarchy {
                epsilon,
                t_star,
                refine,
                levels: Vec::with_capacity(n_levels),
                base_dt_requested: eps2,
                base_dt_used: t_star / n1 as f64,
            };
            h.push_level(1, None);
            if n_levels > 1 {
                h.push_level(n1, Some(n1 as usize));
            }
            while h.levels.len() < n_levels {
                h.push_finer()?;
            }
            Ok(h)
        }
    }
}
