//! Experiment runner: level studies, adaptive runs, classical comparisons
//! and coupled trajectories, written as CSV or JSON.

pub mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::coupling::coupled_trajectory;
use crate::error::{Error, Result};
use crate::mlmc::{
    classical_equivalent, level_study, run_adaptive, steps_for, LevelStudyConfig, MlmcConfig, StudyRow,
    DEFAULT_COST_CEILING,
};
use crate::model::{make_params, InitialCondition, Qoi, SchemeParams};
use crate::rng::{stream_for, StreamKey};

pub use config::Settings;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kinetic-mlmc", version, about = "Multilevel Monte Carlo for kinetic particle schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean and variance of F_l and of level differences at fixed samples.
    LevelStudy(CommandArgs),
    /// Adaptive multilevel run; writes the level table (CSV) and a JSON summary.
    MlmcRun(CommandArgs),
    /// Adaptive run compared with plain Monte Carlo at the finest step (JSON).
    CompareClassical(CommandArgs),
    /// One coupled fine/coarse trajectory pair (CSV).
    Trajectory(CommandArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommandArgs {
    /// Flat key = value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

impl CommandArgs {
    fn resolve(&self) -> Result<Settings> {
        let base = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        Ok(base.overlay(self.settings.clone()))
    }
}

/// Maps an error to its exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::ParameterDomain(_) | Error::StabilityDomain { .. } => EXIT_CONFIG,
        Error::Budget(_) => EXIT_BUDGET,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::LevelStudy(a) => cmd_level_study(&a.resolve()?),
        Command::MlmcRun(a) => cmd_mlmc_run(&a.resolve()?),
        Command::CompareClassical(a) => cmd_compare_classical(&a.resolve()?),
        Command::Trajectory(a) => cmd_trajectory(&a.resolve()?),
    }
}

fn qoi(s: &Settings) -> Result<Qoi> {
    s.qoi.as_deref().map_or(Ok(Qoi::default()), str::parse)
}

fn positive(x: f64, name: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Level-study configuration; `epsilon` is required.
pub fn study_config(s: &Settings) -> Result<LevelStudyConfig> {
    let mut c = LevelStudyConfig::new(positive(Settings::require(s.epsilon, "epsilon")?, "epsilon")?);
    c.t_star = positive(s.t_star.unwrap_or(c.t_star), "t_star")?;
    c.dt0 = positive(s.dt0.unwrap_or(c.dt0), "dt0")?;
    c.refine = s.refine.unwrap_or(c.refine);
    c.levels = s.max_levels.unwrap_or(c.levels);
    c.samples_per_level = s.samples_per_level.unwrap_or(c.samples_per_level);
    c.qoi = qoi(s)?;
    c.seed = s.seed.unwrap_or(0);
    c.workers = s.workers;
    c.cost_ceiling = s.cost_ceiling_steps(DEFAULT_COST_CEILING)?;
    Ok(c)
}

/// Adaptive-run configuration; `rmse` is required, the rest default to
/// `epsilon = 0.1`, `t_star = 0.5`, `M = 2`, geometric levels.
pub fn mlmc_config(s: &Settings) -> Result<MlmcConfig> {
    let rmse = positive(Settings::require(s.rmse, "rmse")?, "rmse")?;
    let epsilon = positive(s.epsilon.unwrap_or(0.1), "epsilon")?;
    let t_star = positive(s.t_star.unwrap_or(0.5), "t_star")?;
    let mut c = MlmcConfig::new(epsilon, t_star, rmse);
    c.qoi = qoi(s)?;
    c.refine = s.refine.unwrap_or(2);
    if let Some(st) = &s.strategy {
        c.strategy = st.parse()?;
    }
    c.seed = s.seed.unwrap_or(0);
    c.max_levels = s.max_levels.unwrap_or(c.max_levels);
    c.weak_order = s.weak_order_value()?;
    c.workers = s.workers;
    c.cost_ceiling = s.cost_ceiling_steps(DEFAULT_COST_CEILING)?;
    c.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(c)
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_study_csv(rows: &[StudyRow], w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "level",
        "dt",
        "n_steps",
        "samples",
        "mean_fine",
        "var_fine",
        "stderr_fine",
        "mean_diff",
        "abs_mean_diff",
        "var_diff",
        "stderr_diff",
    ])?;
    for r in rows {
        csv.write_record([
            r.level.to_string(),
            num(r.dt),
            r.n_steps.to_string(),
            r.samples.to_string(),
            num(r.mean_fine),
            num(r.var_fine),
            num(r.stderr_fine),
            num(r.mean_diff),
            num(r.abs_mean_diff),
            num(r.var_diff),
            num(r.stderr_diff),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn cmd_level_study(s: &Settings) -> Result<()> {
    let c = study_config(s)?;
    let rows = level_study(&c)?;
    write_study_csv(&rows, writer(s.out.as_deref())?)
}

/// Writes the level table to `out` (stdout when unset) and the JSON
/// summary next to it with a `.json` extension (stderr when unset).
pub fn cmd_mlmc_run(s: &Settings) -> Result<()> {
    let report = run_adaptive(&mlmc_config(s)?)?;
    report.table.write_csv(writer(s.out.as_deref())?)?;
    match &s.out {
        Some(p) => write_json(&report.summary(), BufWriter::new(File::create(p.with_extension("json"))?)),
        None => write_json(&report.summary(), io::stderr().lock()),
    }
}

#[derive(Debug, Serialize)]
struct Comparison {
    rmse: f64,
    classical_cost: f64,
    mlmc_cost: f64,
    speedup: f64,
    classical_samples: u64,
    classical_cost_per_sample: f64,
    levels: usize,
    estimate: f64,
}

pub fn cmd_compare_classical(s: &Settings) -> Result<()> {
    let report = run_adaptive(&mlmc_config(s)?)?;
    let c = classical_equivalent(&report);
    let out = Comparison {
        rmse: c.rmse,
        classical_cost: c.classical_cost,
        mlmc_cost: c.mlmc_cost,
        speedup: c.speedup,
        classical_samples: c.samples,
        classical_cost_per_sample: c.cost_per_sample,
        levels: report.table.rows.len(),
        estimate: report.estimate(),
    };
    write_json(&out, writer(s.out.as_deref())?)
}

/// Which parts of the transport-diffusion step are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryMode {
    Full,
    DiffusionOnly,
    TransportOnly,
}

impl std::str::FromStr for TrajectoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "diffusion-only" => Ok(Self::DiffusionOnly),
            "transport-only" => Ok(Self::TransportOnly),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected full, diffusion-only or transport-only)"
            ))),
        }
    }
}

impl TrajectoryMode {
    pub fn apply(self, p: SchemeParams) -> SchemeParams {
        match self {
            Self::Full => p,
            Self::DiffusionOnly => p.without_drift(),
            Self::TransportOnly => p.without_diffusion(),
        }
    }
}

/// Writes one coupled pair. Defaults: `epsilon = 0.5`, `dt_fine = 0.2`,
/// `dt_coarse = 1`, `t_star = 10`, full mode; `M` overrides `dt_coarse`.
pub fn cmd_trajectory(s: &Settings) -> Result<()> {
    let epsilon = positive(s.epsilon.unwrap_or(0.5), "epsilon")?;
    let dt_fine = positive(s.dt_fine.unwrap_or(0.2), "dt_fine")?;
    let dt_coarse = match s.refine {
        Some(m) if m >= 1 => dt_fine * m as f64,
        Some(_) => return Err(Error::Config("M must be >= 1".into())),
        None => positive(s.dt_coarse.unwrap_or(1.0), "dt_coarse")?,
    };
    let t_star = positive(s.t_star.unwrap_or(10.0), "t_star")?;
    let mode: TrajectoryMode = s.mode.as_deref().unwrap_or("full").parse()?;
    let pf = mode.apply(make_params(epsilon, dt_fine)?);
    let pc = mode.apply(make_params(epsilon, dt_coarse)?);
    let windows = steps_for(t_star, dt_coarse)?;
    let mut draws = stream_for(StreamKey::new(s.seed.unwrap_or(0), 0, 0));
    let start = InitialCondition::OriginFairSign.sample(&mut draws);
    let rows = coupled_trajectory(start, pf, pc, windows, &mut draws)?;
    let mut csv = csv::Writer::from_writer(writer(s.out.as_deref())?);
    csv.write_record([
        "t",
        "x_fine",
        "sign_fine",
        "collided_fine",
        "x_coarse",
        "sign_coarse",
        "collided_coarse",
    ])?;
    for r in &rows {
        csv.write_record([
            num(r.t),
            num(r.x_fine),
            r.sign_fine.to_string(),
            u8::from(r.collided_fine).to_string(),
            num(r.x_coarse),
            r.sign_coarse.to_string(),
            u8::from(r.collided_coarse).to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(text: &str) -> Settings {
        Settings::parse(text).unwrap()
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::ParameterDomain("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Budget("x".into())), EXIT_BUDGET);
        assert_eq!(exit_code(&Error::Invariant("x".into())), EXIT_FAILURE);
    }

    #[test]
    fn missing_required_settings() {
        assert!(matches!(study_config(&settings("")), Err(Error::Config(_))));
        assert!(matches!(mlmc_config(&settings("epsilon = 0.1")), Err(Error::Config(_))));
        assert!(matches!(mlmc_config(&settings("rmse = -1")), Err(Error::Config(_))));
        assert!(matches!(mlmc_config(&settings("rmse = 0.1\nstrategy = sideways")), Err(Error::Config(_))));
    }

    #[test]
    fn mlmc_defaults() {
        let c = mlmc_config(&settings("rmse = 0.01\nstrategy = coarse-horizon")).unwrap();
        assert_eq!((c.epsilon, c.t_star, c.refine), (0.1, 0.5, 2));
        assert_eq!(c.strategy, crate::mlmc::Strategy::CoarseHorizon);
    }

    #[test]
    fn study_defaults() {
        let c = study_config(&settings("epsilon = 10")).unwrap();
        assert_eq!((c.t_star, c.dt0, c.levels, c.samples_per_level), (5.0, 2.5, 10, 100_000));
    }

    #[test]
    fn trajectory_modes_parse() {
        assert_eq!("diffusion-only".parse::<TrajectoryMode>().unwrap(), TrajectoryMode::DiffusionOnly);
        assert!("both".parse::<TrajectoryMode>().is_err());
        let p = make_params(0.5, 0.2).unwrap();
        assert_eq!(TrajectoryMode::DiffusionOnly.apply(p).v_mag(), 0.0);
        assert_eq!(TrajectoryMode::TransportOnly.apply(p).diff_coef(), 0.0);
    }
}
