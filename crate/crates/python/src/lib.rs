//! Python bindings: parameters, path simulation, coupling, reference
//! moments, hierarchies, allocation and the adaptive estimator.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use kinetic_mlmc::mlmc::{self, LevelStudyConfig, MlmcConfig, Strategy};
use kinetic_mlmc::{
    coupling, model, oracle, stream_for, Error, InitialCondition, ParticleState, Qoi, Sign, StreamKey,
};

create_exception!(kinetic_mlmc, BudgetError, PyException);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Budget(m) => BudgetError::new_err(m),
        e @ (Error::Config(_) | Error::ParameterDomain(_) | Error::StabilityDomain { .. }) => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Converts any serializable value to plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_qoi(s: &str) -> PyResult<Qoi> {
    s.parse().map_err(py_err)
}

/// Derived AP coefficients for one `(epsilon, dt)`.
#[pyclass(name = "SchemeParams", frozen, from_py_object)]
#[derive(Clone)]
struct PySchemeParams(model::SchemeParams);

#[pymethods]
impl PySchemeParams {
    #[new]
    fn new(epsilon: f64, dt: f64) -> PyResult<Self> {
        model::make_params(epsilon, dt).map(Self).map_err(py_err)
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }
    #[getter]
    fn v_mag(&self) -> f64 {
        self.0.v_mag()
    }
    #[getter]
    fn diff_coef(&self) -> f64 {
        self.0.diff_coef()
    }
    #[getter]
    fn p_collide(&self) -> f64 {
        self.0.p_collide()
    }
    #[getter]
    fn p_no_collide(&self) -> f64 {
        self.0.p_no_collide()
    }
    fn __repr__(&self) -> String {
        format!("SchemeParams(epsilon={}, dt={})", self.0.epsilon(), self.0.dt())
    }
}

fn sign_of(v: i8) -> PyResult<Sign> {
    Sign::from_i8(v).map_err(py_err)
}

/// One AP transport-diffusion step; returns the new position.
#[pyfunction]
fn ap_transport_diffusion_step(params: &PySchemeParams, x: f64, sign: i8, xi: f64) -> PyResult<f64> {
    Ok(model::ap_transport_diffusion_step(ParticleState::new(x, sign_of(sign)?), &params.0, xi).x)
}

/// One AP collision; returns the new sign.
#[pyfunction]
fn ap_collision_step(params: &PySchemeParams, sign: i8, alpha: f64, sign_draw: i8) -> PyResult<i8> {
    let s = ParticleState::new(0.0, sign_of(sign)?);
    let out = model::ap_collision_step(s, &params.0, alpha, sign_of(sign_draw)?).map_err(py_err)?;
    Ok(out.sign.as_i8())
}

/// Terminal positions of `n_paths` independent AP paths from the origin.
#[pyfunction]
#[pyo3(signature = (epsilon, dt, n_steps, n_paths, seed=0))]
fn simulate(py: Python<'_>, epsilon: f64, dt: f64, n_steps: u64, n_paths: u64, seed: u64) -> PyResult<Vec<f64>> {
    let params = model::make_params(epsilon, dt).map_err(py_err)?;
    py.detach(|| {
        (0..n_paths)
            .map(|i| {
                let mut d = stream_for(StreamKey::new(seed, 0, i));
                let start = InitialCondition::OriginFairSign.sample(&mut d);
                model::simulate_path(start, &params, n_steps, &mut d).map(|s| s.x)
            })
            .collect::<kinetic_mlmc::Result<Vec<f64>>>()
    })
    .map_err(py_err)
}

/// Terminal `(x_fine, x_coarse)` of one coupled pair started at the origin.
#[pyfunction]
#[pyo3(signature = (epsilon, dt_fine, dt_coarse, n_coarse_steps, seed=0, sample_index=0))]
fn coupled_pair(
    epsilon: f64,
    dt_fine: f64,
    dt_coarse: f64,
    n_coarse_steps: u64,
    seed: u64,
    sample_index: u64,
) -> PyResult<(f64, f64)> {
    let pf = model::make_params(epsilon, dt_fine).map_err(py_err)?;
    let pc = model::make_params(epsilon, dt_coarse).map_err(py_err)?;
    let mut d = stream_for(StreamKey::new(seed, 1, sample_index));
    let start = InitialCondition::OriginFairSign.sample(&mut d);
    let (f, c) = coupling::coupled_path_pair(start, &pf, &pc, n_coarse_steps, &mut d).map_err(py_err)?;
    Ok((f.x, c.x))
}

/// Every fine time point of one coupled pair, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (epsilon, dt_fine, dt_coarse, n_windows, seed=0))]
fn trajectory<'py>(
    py: Python<'py>,
    epsilon: f64,
    dt_fine: f64,
    dt_coarse: f64,
    n_windows: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let pf = model::make_params(epsilon, dt_fine).map_err(py_err)?;
    let pc = model::make_params(epsilon, dt_coarse).map_err(py_err)?;
    let mut d = stream_for(StreamKey::new(seed, 0, 0));
    let start = InitialCondition::OriginFairSign.sample(&mut d);
    let rows = coupling::coupled_trajectory(start, pf, pc, n_windows, &mut d).map_err(py_err)?;
    to_py(py, &rows)
}

#[pyfunction]
fn coarsen_xi(xi_fine: Vec<f64>) -> PyResult<f64> {
    coupling::coarsen_xi(&xi_fine).map_err(py_err)
}

#[pyfunction]
fn coarsen_alpha(alpha_fine: Vec<f64>) -> PyResult<f64> {
    coupling::coarsen_alpha(&alpha_fine).map_err(py_err)
}

/// Exact `E[X_N^2]` from the origin with a fair sign.
#[pyfunction]
fn exact_second_moment(epsilon: f64, dt: f64, n_steps: u64) -> PyResult<f64> {
    oracle::exact_second_moment(oracle::MomentQuery { epsilon, dt, n_steps }).map_err(py_err)
}

#[pyfunction]
fn heat_limit_moment(t_star: f64) -> f64 {
    oracle::heat_limit_moment(t_star)
}

#[pyfunction]
fn sign_autocorrelation(p_collide: f64, lag: u64) -> f64 {
    oracle::sign_autocorrelation(p_collide, lag)
}

fn parse_strategy(s: &str) -> PyResult<Strategy> {
    s.parse().map_err(py_err)
}

/// Level specs as a list of dicts.
#[pyfunction]
#[pyo3(signature = (epsilon, t_star, levels, refine=2, strategy="geometric"))]
fn build_hierarchy<'py>(
    py: Python<'py>,
    epsilon: f64,
    t_star: f64,
    levels: usize,
    refine: usize,
    strategy: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let h = mlmc::build_hierarchy(parse_strategy(strategy)?, epsilon, t_star, refine, levels).map_err(py_err)?;
    to_py(py, &h.levels)
}

#[pyfunction]
#[pyo3(signature = (rmse, variances, costs, floor=mlmc::WARMUP_SAMPLES))]
fn allocate_samples(rmse: f64, variances: Vec<f64>, costs: Vec<f64>, floor: u64) -> PyResult<Vec<u64>> {
    if variances.len() != costs.len() {
        return Err(PyValueError::new_err("variances and costs differ in length"));
    }
    let vc: Vec<(f64, f64)> = variances.into_iter().zip(costs).collect();
    mlmc::allocate_samples(rmse, &vc, floor).map_err(py_err)
}

/// Adaptive run (`weak_order=None` fits the bias rate); returns the JSON summary plus the level table as a dict.
#[pyfunction]
#[pyo3(signature = (
    rmse, epsilon=0.1, t_star=0.5, refine=2, strategy="geometric", seed=0,
    max_levels=20, qoi="x2", weak_order=Some(1.0), workers=None, cost_ceiling=None
))]
#[allow(clippy::too_many_arguments)]
fn run_adaptive<'py>(
    py: Python<'py>,
    rmse: f64,
    epsilon: f64,
    t_star: f64,
    refine: usize,
    strategy: &str,
    seed: u64,
    max_levels: usize,
    qoi: &str,
    weak_order: Option<f64>,
    workers: Option<usize>,
    cost_ceiling: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut c = MlmcConfig::new(epsilon, t_star, rmse);
    c.refine = refine;
    c.strategy = parse_strategy(strategy)?;
    c.seed = seed;
    c.max_levels = max_levels;
    c.qoi = parse_qoi(qoi)?;
    c.weak_order = weak_order;
    c.workers = workers;
    if let Some(cc) = cost_ceiling {
        c.cost_ceiling = cc;
    }
    let report = py.detach(|| mlmc::run_adaptive(&c)).map_err(py_err)?;
    let out = to_py(py, &report.summary())?;
    out.set_item("table", to_py(py, &report.table)?)?;
    Ok(out)
}

/// Plain Monte Carlo equivalent: `P_C = ceil(V[F_L] / sum V[Y_l])` paths.
#[pyfunction]
#[pyo3(signature = (var_fine_finest, estimator_variance, cost_per_sample, mlmc_cost, rmse=f64::NAN))]
fn classical_equivalent<'py>(
    py: Python<'py>,
    var_fine_finest: f64,
    estimator_variance: f64,
    cost_per_sample: f64,
    mlmc_cost: f64,
    rmse: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = mlmc::classical_equivalent_from(rmse, var_fine_finest, estimator_variance, cost_per_sample, mlmc_cost);
    to_py(py, &c)
}

#[pyfunction]
fn telescopic_combine(level_means: Vec<f64>) -> f64 {
    mlmc::telescopic_combine(&level_means)
}

/// Fixed-sample level study; rows as dicts.
#[pyfunction]
#[pyo3(signature = (
    epsilon, t_star=5.0, dt0=2.5, refine=2, levels=10, samples_per_level=100_000,
    qoi="x2", seed=0, workers=None
))]
#[allow(clippy::too_many_arguments)]
fn level_study<'py>(
    py: Python<'py>,
    epsilon: f64,
    t_star: f64,
    dt0: f64,
    refine: usize,
    levels: usize,
    samples_per_level: u64,
    qoi: &str,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut c = LevelStudyConfig::new(epsilon);
    c.t_star = t_star;
    c.dt0 = dt0;
    c.refine = refine;
    c.levels = levels;
    c.samples_per_level = samples_per_level;
    c.qoi = parse_qoi(qoi)?;
    c.seed = seed;
    c.workers = workers;
    let rows = py.detach(|| mlmc::level_study(&c)).map_err(py_err)?;
    to_py(py, &rows)
}

#[pymodule]
#[pyo3(name = "kinetic_mlmc")]
fn kinetic_mlmc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BudgetError", m.py().get_type::<BudgetError>())?;
    m.add_class::<PySchemeParams>()?;
    m.add_function(wrap_pyfunction!(ap_transport_diffusion_step, m)?)?;
    m.add_function(wrap_pyfunction!(ap_collision_step, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(coupled_pair, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(coarsen_xi, m)?)?;
    m.add_function(wrap_pyfunction!(coarsen_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(exact_second_moment, m)?)?;
    m.add_function(wrap_pyfunction!(heat_limit_moment, m)?)?;
    m.add_function(wrap_pyfunction!(sign_autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(build_hierarchy, m)?)?;
    m.add_function(wrap_pyfunction!(allocate_samples, m)?)?;
    m.add_function(wrap_pyfunction!(run_adaptive, m)?)?;
    m.add_function(wrap_pyfunction!(classical_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(telescopic_combine, m)?)?;
    m.add_function(wrap_pyfunction!(level_study, m)?)?;
    Ok(())
}
