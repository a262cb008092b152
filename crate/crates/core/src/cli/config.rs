//! Experiment settings: a flat `key = value` file overridden by flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

use crate::error::{Error, Result};

/// Every setting any command understands. Unset fields take command
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Settings {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "t-star")]
    pub t_star: Option<f64>,
    /// Root-mean-square error target.
    #[arg(long)]
    pub rmse: Option<f64>,
    /// Refinement factor between levels.
    #[arg(short = 'M', long = "M")]
    pub refine: Option<usize>,
    /// geometric | coarse-horizon
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "samples-per-level")]
    pub samples_per_level: Option<u64>,
    #[arg(long = "dt-fine")]
    pub dt_fine: Option<f64>,
    #[arg(long = "dt-coarse")]
    pub dt_coarse: Option<f64>,
    /// Coarsest step of a level study.
    #[arg(long)]
    pub dt0: Option<f64>,
    /// Trajectory mode: full | diffusion-only | transport-only
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of levels (level count of a level study).
    #[arg(long = "max-levels")]
    pub max_levels: Option<usize>,
    /// Cap on particle steps, e.g. 2e11.
    #[arg(long = "cost-ceiling")]
    pub cost_ceiling: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Quantity of interest: x2 | x | abs
    #[arg(long)]
    pub qoi: Option<String>,
    /// Weak order for the bias test (default 1), or `fit` to estimate it.
    #[arg(long = "weak-order")]
    pub weak_order: Option<String>,
}

/// Keys accepted in a config file.
pub const KEYS: [&str; 17] = [
    "epsilon",
    "t_star",
    "rmse",
    "M",
    "strategy",
    "seed",
    "samples_per_level",
    "dt_fine",
    "dt_coarse",
    "dt0",
    "mode",
    "out",
    "max_levels",
    "cost_ceiling",
    "workers",
    "qoi",
    "weak_order",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("invalid value '{raw}' for key '{key}'")))
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, raw) = (key.trim(), raw.trim());
            match key {
                "epsilon" => s.epsilon = Some(value(key, raw)?),
                "t_star" => s.t_star = Some(value(key, raw)?),
                "rmse" => s.rmse = Some(value(key, raw)?),
                "M" => s.refine = Some(value(key, raw)?),
                "strategy" => s.strategy = Some(raw.to_string()),
                "seed" => s.seed = Some(value(key, raw)?),
                "samples_per_level" => s.samples_per_level = Some(value(key, raw)?),
                "dt_fine" => s.dt_fine = Some(value(key, raw)?),
                "dt_coarse" => s.dt_coarse = Some(value(key, raw)?),
                "dt0" => s.dt0 = Some(value(key, raw)?),
                "mode" => s.mode = Some(raw.to_string()),
                "out" => s.out = Some(PathBuf::from(raw)),
                "max_levels" => s.max_levels = Some(value(key, raw)?),
                "cost_ceiling" => s.cost_ceiling = Some(value(key, raw)?),
                "workers" => s.workers = Some(value(key, raw)?),
                "qoi" => s.qoi = Some(raw.to_string()),
                "weak_order" => s.weak_order = Some(raw.to_string()),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}' (known: {})",
                        n + 1,
                        KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            epsilon: over.epsilon.or(self.epsilon),
            t_star: over.t_star.or(self.t_star),
            rmse: over.rmse.or(self.rmse),
            refine: over.refine.or(self.refine),
            strategy: over.strategy.or(self.strategy),
            seed: over.seed.or(self.seed),
            samples_per_level: over.samples_per_level.or(self.samples_per_level),
            dt_fine: over.dt_fine.or(self.dt_fine),
            dt_coarse: over.dt_coarse.or(self.dt_coarse),
            dt0: over.dt0.or(self.dt0),
            mode: over.mode.or(self.mode),
            out: over.out.or(self.out),
            max_levels: over.max_levels.or(self.max_levels),
            cost_ceiling: over.cost_ceiling.or(self.cost_ceiling),
            workers: over.workers.or(self.workers),
            qoi: over.qoi.or(self.qoi),
            weak_order: over.weak_order.or(self.weak_order),
        }
    }

    /// The cost ceiling as a whole number of particle steps.
    pub fn cost_ceiling_steps(&self, default: u64) -> Result<u64> {
        match self.cost_ceiling {
            None => Ok(default),
            Some(c) if c >= 1.0 && c.is_finite() => Ok(c.min(u64::MAX as f64) as u64),
            Some(c) => Err(Error::Config(format!("cost ceiling must be >= 1, got {c}"))),
        }
    }

    /// `None` means fit the weak order from the data.
    pub fn weak_order_value(&self) -> Result<Option<f64>> {
        match self.weak_order.as_deref() {
            None => Ok(Some(1.0)),
            Some("fit") => Ok(None),
            Some(raw) => value("weak_order", raw).map(Some),
        }
    }

    pub fn require<T: Copy>(field: Option<T>, name: &str) -> Result<T> {
        field.ok_or_else(|| Error::Config(format!("missing required setting '{name}'")))
    }
}
