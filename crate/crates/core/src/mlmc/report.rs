//! Per-level result tables, serialization and the classical comparison.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Qoi;
use crate::stats::LevelStats;

use super::hierarchy::{LevelSpec, Strategy};

/// One row of the per-level table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    pub dt: f64,
    pub n_steps: u64,
    pub samples: u64,
    pub mean_fine: f64,
    pub var_fine: f64,
    /// `E[F_l - F_{l-1}]`, signed.
    pub mean_diff: f64,
    /// `V_l = V[F_l - F_{l-1}]`.
    pub var_diff: f64,
    /// `V[Y_l] = V_l / P_l`.
    pub var_estimator: f64,
    pub cost_per_sample: f64,
    /// `P_l C_l`.
    pub level_cost: f64,
}

impl LevelRow {
    pub fn from_stats(spec: &LevelSpec, stats: &LevelStats) -> Self {
        let samples = stats.n_samples();
        let var_diff = stats.diff.variance();
        Self {
            level: spec.index,
            dt: spec.dt,
            n_steps: spec.n_steps,
            samples,
            mean_fine: stats.fine.mean(),
            var_fine: stats.fine.variance(),
            mean_diff: stats.diff.mean(),
            var_diff,
            var_estimator: if samples == 0 { f64::INFINITY } else { var_diff / samples as f64 },
            cost_per_sample: spec.cost_per_sample,
            level_cost: samples as f64 * spec.cost_per_sample,
        }
    }

    pub fn abs_mean_diff(&self) -> f64 {
        self.mean_diff.abs()
    }
}

/// The per-level table with its totals; exactly what the CSV holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTable {
    pub rmse: f64,
    pub rows: Vec<LevelRow>,
    /// Telescopic estimate `sum_l Y_l`.
    pub estimate: f64,
    /// `sum_l V[Y_l]`.
    pub estimator_variance: f64,
    /// `sum_l P_l C_l`.
    pub total_cost: f64,
}

/// `Y = sum_l Y_l`.
pub fn telescopic_combine(level_means: &[f64]) -> f64 {
    level_means.iter().sum()
}

impl LevelTable {
    pub fn from_rows(rmse: f64, rows: Vec<LevelRow>) -> Self {
        let means: Vec<f64> = rows.iter().map(|r| r.mean_diff).collect();
        Self {
            rmse,
            estimate: telescopic_combine(&means),
            estimator_variance: rows.iter().map(|r| r.var_estimator).sum(),
            total_cost: rows.iter().map(|r| r.level_cost).sum(),
            rows,
        }
    }

    pub const HEADER: [&'static str; 14] = [
        "level",
        "dt",
        "n_steps",
        "samples",
        "mean_fine",
        "var_fine",
        "mean_diff",
        "abs_mean_diff",
        "var_diff",
        "var_estimator",
        "cost_per_sample",
        "level_cost",
        "diff_below_rmse_sq",
        "rmse",
    ];

    /// Writes the table with a totals row whose `mean_diff` is the estimate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        let e2 = self.rmse * self.rmse;
        for r in &self.rows {
            w.write_record([
                r.level.to_string(),
                num(r.dt),
                r.n_steps.to_string(),
                r.samples.to_string(),
                num(r.mean_fine),
                num(r.var_fine),
                num(r.mean_diff),
                num(r.abs_mean_diff()),
                num(r.var_diff),
                num(r.var_estimator),
                num(r.cost_per_sample),
                num(r.level_cost),
                (r.abs_mean_diff() < e2).to_string(),
                num(self.rmse),
            ])?;
        }
        let blank = String::new;
        w.write_record([
            "total".to_string(),
            blank(),
            blank(),
            self.rows.iter().map(|r| r.samples).sum::<u64>().to_string(),
            blank(),
            blank(),
            num(self.estimate),
            num(self.estimate.abs()),
            blank(),
            num(self.estimator_variance),
            blank(),
            num(self.total_cost),
            blank(),
            num(self.rmse),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a table written by [`LevelTable::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().ne(Self::HEADER.iter().copied()) {
            return Err(Error::Config("unexpected CSV header".into()));
        }
        let mut rows = Vec::new();
        let mut totals = None;
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| parse::<f64>(&rec[i], Self::HEADER[i]);
            let u = |i: usize| parse::<u64>(&rec[i], Self::HEADER[i]);
            if &rec[0] == "total" {
                totals = Some((f(6)?, f(9)?, f(11)?, f(13)?));
                continue;
            }
            rows.push(LevelRow {
                level: parse::<usize>(&rec[0], "level")?,
                dt: f(1)?,
                n_steps: u(2)?,
                samples: u(3)?,
                mean_fine: f(4)?,
                var_fine: f(5)?,
                mean_diff: f(6)?,
                var_diff: f(8)?,
                var_estimator: f(9)?,
                cost_per_sample: f(10)?,
                level_cost: f(11)?,
            });
        }
        let (estimate, estimator_variance, total_cost, rmse) =
            totals.ok_or_else(|| Error::Config("CSV has no totals row".into()))?;
        Ok(Self {
            rmse,
            rows,
            estimate,
            estimator_variance,
            total_cost,
        })
    }
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn parse<T: std::str::FromStr>(s: &str, column: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("cannot parse '{s}' in column {column}")))
}

/// Outcome of an adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcReport {
    pub epsilon: f64,
    pub t_star: f64,
    pub qoi: Qoi,
    pub refine: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub table: LevelTable,
    /// Variance target `E^2 / 2`.
    pub variance_budget: f64,
    /// Extrapolated remaining bias at termination.
    pub bias_estimate: f64,
    /// Threshold `E / sqrt(2)` the bias estimate was tested against.
    pub bias_tolerance: f64,
    /// Weak order used by the final bias test.
    pub weak_order: f64,
    pub converged: bool,
    /// Number of sample/estimate rounds.
    pub rounds: usize,
    pub particle_steps: u64,
    pub base_dt_requested: f64,
    pub base_dt_used: f64,
}

impl MlmcReport {
    pub fn estimate(&self) -> f64 {
        self.table.estimate
    }

    pub fn total_cost(&self) -> f64 {
        self.table.total_cost
    }

    pub fn levels(&self) -> &[LevelRow] {
        &self.table.rows
    }

    /// Cost of one single-level sample at the finest step.
    pub fn finest_path_cost(&self) -> f64 {
        let finest = self.table.rows.last().expect("report has levels");
        finest.n_steps as f64 * self.epsilon * self.epsilon / self.t_star
    }

    pub fn summary(&self) -> Summary {
        let cmp = classical_equivalent(self);
        Summary {
            epsilon: self.epsilon,
            t_star: self.t_star,
            qoi: self.qoi.name().to_string(),
            refine: self.refine,
            strategy: self.strategy.name().to_string(),
            seed: self.seed,
            rmse: self.table.rmse,
            levels: self.table.rows.len(),
            estimate: self.table.estimate,
            estimator_variance: self.table.estimator_variance,
            variance_budget: self.variance_budget,
            total_cost: self.table.total_cost,
            total_samples: self.table.rows.iter().map(|r| r.samples).sum(),
            bias_estimate: self.bias_estimate,
            bias_tolerance: self.bias_tolerance,
            weak_order: self.weak_order,
            converged: self.converged,
            rounds: self.rounds,
            particle_steps: self.particle_steps,
            base_dt_requested: self.base_dt_requested,
            base_dt_used: self.base_dt_used,
            classical: cmp,
        }
    }
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub epsilon: f64,
    pub t_star: f64,
    pub qoi: String,
    pub refine: usize,
    pub strategy: String,
    pub seed: u64,
    pub rmse: f64,
    pub levels: usize,
    pub estimate: f64,
    pub estimator_variance: f64,
    pub variance_budget: f64,
    pub total_cost: f64,
    pub total_samples: u64,
    pub bias_estimate: f64,
    pub bias_tolerance: f64,
    pub weak_order: f64,
    pub converged: bool,
    pub rounds: usize,
    pub particle_steps: u64,
    pub base_dt_requested: f64,
    pub base_dt_used: f64,
    pub classical: ClassicalComparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalComparison {
    pub rmse: f64,
    /// Single-level samples at the finest step matching the variance.
    pub samples: u64,
    pub cost_per_sample: f64,
    pub classical_cost: f64,
    pub mlmc_cost: f64,
    pub speedup: f64,
}

/// Plain Monte Carlo at the finest step with the same variance:
/// `P_C = ceil(V[F_L] / sum V[Y_l])`, each sample a single path.
pub fn classical_equivalent_from(
    rmse: f64,
    var_fine_finest: f64,
    estimator_variance: f64,
    cost_per_sample: f64,
    mlmc_cost: f64,
) -> ClassicalComparison {
    let samples = ((var_fine_finest / estimator_variance).ceil() as u64).max(1);
    let classical_cost = samples as f64 * cost_per_sample;
    ClassicalComparison {
        rmse,
        samples,
        cost_per_sample,
        classical_cost,
        mlmc_cost,
        speedup: classical_cost / mlmc_cost,
    }
}

pub fn classical_equivalent(report: &MlmcReport) -> ClassicalComparison {
    let finest = report.table.rows.last().expect("report has levels");
    classical_equivalent_from(
        report.table.rmse,
        finest.var_fine,
        report.table.estimator_variance,
        report.finest_path_cost(),
        report.table.total_cost,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(level: usize, mean_diff: f64, var_diff: f64, samples: u64, cost: f64) -> LevelRow {
        LevelRow {
            level,
            dt: 0.01 / 2f64.powi(level as i32),
            n_steps: 50 << level,
            samples,
            mean_fine: 0.1 * level as f64 + 1.0 / 3.0,
            var_fine: 1.5,
            mean_diff,
            var_diff,
            var_estimator: var_diff / samples as f64,
            cost_per_sample: cost,
            level_cost: samples as f64 * cost,
        }
    }

    #[test]
    fn telescoping_examples() {
        assert_eq!(telescopic_combine(&[0.7, 0.0, 0.0]), 0.7);
        assert_relative_eq!(telescopic_combine(&[1.0, 0.1]), 1.1);
    }

    #[test]
    fn table_totals_are_column_sums() {
        let t = LevelTable::from_rows(0.1, vec![row(0, 0.8, 1.3, 1393, 1.0), row(1, 0.01, 0.36, 395, 3.0)]);
        assert_relative_eq!(t.total_cost, 1393.0 + 1185.0);
        assert_relative_eq!(t.estimate, 0.81);
        assert_relative_eq!(t.estimator_variance, 1.3 / 1393.0 + 0.36 / 395.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = LevelTable::from_rows(
            0.01,
            vec![row(0, 0.865, 1.47, 527_920, 1.0), row(1, -1.0 / 7.0, 0.435, 165_386, 3.0)],
        );
        let text = t.to_csv_string().unwrap();
        let back = LevelTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert!(text.lines().last().unwrap().starts_with("total,"));
    }

    #[test]
    fn csv_rejects_foreign_header() {
        assert!(LevelTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn classical_tight_tolerance_example() {
        // 2/3 of C_L = 1536 is one path at the finest step
        let c = classical_equivalent_from(0.01, 1.47, 5.26e-5, 1024.0, 10_102_066.0);
        assert_relative_eq!(c.classical_cost, 2.86e7, max_relative = 2e-3);
        assert!((c.speedup - 2.83).abs() < 0.01, "{}", c.speedup);
    }

    #[test]
    fn classical_loose_tolerance_example() {
        let c = classical_equivalent_from(0.1, 1.70, 6.00e-3, 16.0, 8062.0);
        assert_eq!(c.samples, 284);
        assert_eq!(c.classical_cost, 4544.0);
        assert!((c.speedup - 0.56).abs() < 0.01);
    }

    #[test]
    fn classical_needs_one_sample_when_variances_match() {
        let c = classical_equivalent_from(0.1, 0.5, 0.5, 1.0, 1.0);
        assert_eq!(c.samples, 1);
    }
}
