//! Correlated fine/coarse trajectory pairs across one level refinement.
//!
//! The fine path (time step `dt_f`) is always simulated first. Over each
//! coarse window of `M` fine sub-steps the coarse path (time step
//! `M * dt_f`) is then advanced once using inputs derived from the fine
//! draws:
//!
//! * Brownian increment: `xi_c = sum(xi_f) / sqrt(M)`;
//! * collision uniform: `alpha_c = max(alpha_f)^M`, which is again uniform;
//! * on a coarse collision the new coarse sign is the post-collision sign
//!   of the last fine sub-step that collided.
//!
//! Because `alpha_c >= p_nc(M dt_f)` implies some `alpha_f >= p_nc(dt_f)`,
//! a coarse collision always has a fine collision to copy from. Both
//! marginal laws are those of uncoupled simulations.
//!
//! Sub-steps are indexed `m = 1..=M`; "last" means the largest such `m`.

use crate::error::{domain, Error, Result};
use crate::model::{ap_step, ap_transport_diffusion_step, ParticleState, SchemeParams, Sign};
use crate::rng::Draws;
use serde::{Deserialize, Serialize};

/// Draws and outcomes of the `M` fine sub-steps spanning one coarse step,
/// plus the coarse inputs derived from them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoupledStepRecord {
    pub xi_fine: Vec<f64>,
    pub alpha_fine: Vec<f64>,
    /// Post-step sign of each fine sub-step.
    pub sign_fine: Vec<Sign>,
    pub xi_coarse: f64,
    pub alpha_coarse: f64,
}

impl CoupledStepRecord {
    pub fn with_capacity(m: usize) -> Self {
        Self {
            xi_fine: Vec::with_capacity(m),
            alpha_fine: Vec::with_capacity(m),
            sign_fine: Vec::with_capacity(m),
            xi_coarse: 0.0,
            alpha_coarse: 0.0,
        }
    }

    /// Builds a record from explicit fine draws and computes the coarse
    /// inputs.
    pub fn from_fine(xi_fine: Vec<f64>, alpha_fine: Vec<f64>, sign_fine: Vec<Sign>) -> Result<Self> {
        if xi_fine.len() != alpha_fine.len() || xi_fine.len() != sign_fine.len() {
            return domain("fine draw arrays must have equal length");
        }
        let xi_coarse = coarsen_xi(&xi_fine)?;
        let alpha_coarse = coarsen_alpha(&alpha_fine)?;
        Ok(Self {
            xi_fine,
            alpha_fine,
            sign_fine,
            xi_coarse,
            alpha_coarse,
        })
    }

    pub fn refine_factor(&self) -> usize {
        self.xi_fine.len()
    }

    fn clear(&mut self) {
        self.xi_fine.clear();
        self.alpha_fine.clear();
        self.sign_fine.clear();
    }

    fn finish(&mut self) {
        let m = self.xi_fine.len();
        self.xi_coarse = self.xi_fine.iter().sum::<f64>() / (m as f64).sqrt();
        let max = self.alpha_fine.iter().copied().fold(0.0, f64::max);
        self.alpha_coarse = max.powi(m as i32);
    }

    /// Index (0-based) of the last fine sub-step that collided under
    /// `params_fine`.
    pub fn last_fine_collision(&self, params_fine: &SchemeParams) -> Option<usize> {
        self.alpha_fine.iter().rposition(|&a| params_fine.collides(a))
    }
}

/// Sum of `M` fine Brownian increments rescaled to unit variance.
pub fn coarsen_xi(xi_fine: &[f64]) -> Result<f64> {
    if xi_fine.is_empty() {
        return domain("coarsen_xi needs at least one fine increment");
    }
    Ok(xi_fine.iter().sum::<f64>() / (xi_fine.len() as f64).sqrt())
}

/// `max(alpha_fine)^M`: uniform on `[0, 1]` when the inputs are.
pub fn coarsen_alpha(alpha_fine: &[f64]) -> Result<f64> {
    if alpha_fine.is_empty() {
        return domain("coarsen_alpha needs at least one fine uniform");
    }
    let mut max = 0.0f64;
    for &a in alpha_fine {
        crate::model::check_alpha(a)?;
        max = max.max(a);
    }
    Ok(max.powi(alpha_fine.len() as i32))
}

/// A fine trajectory and its coupled coarse trajectory, on a shared clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledPair {
    pub fine: ParticleState,
    pub coarse: ParticleState,
    pub params_fine: SchemeParams,
    pub params_coarse: SchemeParams,
}

impl CoupledPair {
    /// Both paths start from the same state.
    pub fn new(initial: ParticleState, params_fine: SchemeParams, params_coarse: SchemeParams) -> Self {
        Self {
            fine: initial,
            coarse: initial,
            params_fine,
            params_coarse,
        }
    }
}

/// Outcome of one coarse window for the coarse path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseWindow {
    pub state: ParticleState,
    pub collided: bool,
}

/// Advances the coarse path of `pair` over one window, using only `record`.
pub fn coupled_coarse_window(pair: &CoupledPair, record: &CoupledStepRecord) -> Result<CoarseWindow> {
    let moved = ap_transport_diffusion_step(pair.coarse, &pair.params_coarse, record.xi_coarse);
    if !pair.params_coarse.collides(record.alpha_coarse) {
        return Ok(CoarseWindow {
            state: moved,
            collided: false,
        });
    }
    match record.last_fine_collision(&pair.params_fine) {
        Some(i) => Ok(CoarseWindow {
            state: ParticleState {
                x: moved.x,
                sign: record.sign_fine[i],
            },
            collided: true,
        }),
        None => Err(Error::Invariant(format!(
            "coarse collision (alpha_c = {}, p_nc = {}) without a fine collision",
            record.alpha_coarse,
            pair.params_coarse.p_no_collide()
        ))),
    }
}

/// Per-fine-sub-step observation handed to [`CoupledStepper::window`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineSubStep {
    /// 1-based index within the window.
    pub m: usize,
    pub state: ParticleState,
    pub collided: bool,
}

/// Steps a [`CoupledPair`] window by window, reusing one record buffer.
#[derive(Debug, Clone)]
pub struct CoupledStepper {
    pub pair: CoupledPair,
    refine: usize,
    record: CoupledStepRecord,
}

impl CoupledStepper {
    pub fn new(pair: CoupledPair, refine_factor: usize) -> Result<Self> {
        if refine_factor == 0 {
            return domain("refine factor must be >= 1");
        }
        Ok(Self {
            pair,
            refine: refine_factor,
            record: CoupledStepRecord::with_capacity(refine_factor),
        })
    }

    pub fn refine_factor(&self) -> usize {
        self.refine
    }

    /// The record of the most recent window.
    pub fn record(&self) -> &CoupledStepRecord {
        &self.record
    }

    /// Runs `M` fine sub-steps and then the coarse step.
    #[inline]
    pub fn step<D: Draws>(&mut self, draws: &mut D) -> Result<CoarseWindow> {
        self.window(draws, |_| {})
    }

    /// As [`step`](Self::step), reporting each fine sub-step to `observe`.
    pub fn window<D: Draws>(
        &mut self,
        draws: &mut D,
        mut observe: impl FnMut(FineSubStep),
    ) -> Result<CoarseWindow> {
        self.record.clear();
        let mut fine = self.pair.fine;
        for m in 1..=self.refine {
            let (next, d) = ap_step(fine, &self.pair.params_fine, draws);
            fine = next;
            self.record.xi_fine.push(d.xi);
            self.record.alpha_fine.push(d.alpha);
            self.record.sign_fine.push(fine.sign);
            observe(FineSubStep {
                m,
                state: fine,
                collided: d.collided,
            });
        }
        self.record.finish();
        self.pair.fine = fine;
        let window = coupled_coarse_window(&self.pair, &self.record)?;
        self.pair.coarse = window.state;
        Ok(window)
    }
}

/// Infers the integer refinement factor `dt_coarse / dt_fine`.
pub fn refine_factor_of(params_fine: &SchemeParams, params_coarse: &SchemeParams) -> Result<usize> {
    let ratio = params_coarse.dt() / params_fine.dt();
    let m = ratio.round();
    if m.is_nan() || m < 1.0 || (ratio - m).abs() > 1e-9 * m {
        return domain(format!(
            "coarse dt {} is not an integer multiple of fine dt {}",
            params_coarse.dt(),
            params_fine.dt()
        ));
    }
    if params_fine.epsilon() != params_coarse.epsilon() {
        return domain("fine and coarse levels must share epsilon");
    }
    Ok(m as usize)
}

/// Simulates a coupled pair over `n_coarse_steps` coarse windows and
/// returns the terminal `(fine, coarse)` states.
pub fn coupled_path_pair<D: Draws>(
    initial: ParticleState,
    params_fine: &SchemeParams,
    params_coarse: &SchemeParams,
    n_coarse_steps: u64,
    draws: &mut D,
) -> Result<(ParticleState, ParticleState)> {
    if n_coarse_steps == 0 {
        return domain("n_coarse_steps must be >= 1");
    }
    let m = refine_factor_of(params_fine, params_coarse)?;
    coupled_path_pair_with_factor(initial, params_fine, params_coarse, m, n_coarse_steps, draws)
}

/// As [`coupled_path_pair`] with an explicit refinement factor. This is the
/// sampling hot path; it keeps the coarse-input reductions in registers.
pub(crate) fn coupled_path_pair_with_factor<D: Draws>(
    initial: ParticleState,
    params_fine: &SchemeParams,
    params_coarse: &SchemeParams,
    m: usize,
    n_coarse_steps: u64,
    draws: &mut D,
) -> Result<(ParticleState, ParticleState)> {
    let sqrt_m = (m as f64).sqrt();
    let mut fine = initial;
    let mut coarse = initial;
    for _ in 0..n_coarse_steps {
        let mut xi_sum = 0.0;
        let mut alpha_max = 0.0f64;
        let mut last_collision_sign = None;
        for _ in 0..m {
            let (next, d) = ap_step(fine, params_fine, draws);
            fine = next;
            xi_sum += d.xi;
            alpha_max = alpha_max.max(d.alpha);
            if d.collided {
                last_collision_sign = Some(fine.sign);
            }
        }
        let xi_c = xi_sum / sqrt_m;
        coarse = ap_transport_diffusion_step(coarse, params_coarse, xi_c);
        if params_coarse.collides(alpha_max.powi(m as i32)) {
            match last_collision_sign {
                Some(sign) => coarse.sign = sign,
                None => {
                    return Err(Error::Invariant(
                        "coarse collision without a fine collision".into(),
                    ))
                }
            }
        }
    }
    Ok((fine, coarse))
}

/// One fine time point of a recorded coupled pair. Coarse columns hold the
/// latest coarse state at or before `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x_fine: f64,
    pub sign_fine: i8,
    pub collided_fine: bool,
    pub x_coarse: f64,
    pub sign_coarse: i8,
    pub collided_coarse: bool,
}

/// Records every fine time point of a coupled pair over `n_windows` coarse
/// steps, starting with the shared initial state at `t = 0`.
pub fn coupled_trajectory<D: Draws>(
    initial: ParticleState,
    params_fine: SchemeParams,
    params_coarse: SchemeParams,
    n_windows: u64,
    draws: &mut D,
) -> Result<Vec<TrajectoryRow>> {
    let m = refine_factor_of(&params_fine, &params_coarse)?;
    let dt = params_fine.dt();
    let mut stepper = CoupledStepper::new(CoupledPair::new(initial, params_fine, params_coarse), m)?;
    let mut rows = Vec::with_capacity(n_windows as usize * m + 1);
    let row = |k: u64, fine: ParticleState, cf: bool, coarse: ParticleState, cc: bool| TrajectoryRow {
        t: k as f64 * dt,
        x_fine: fine.x,
        sign_fine: fine.sign.as_i8(),
        collided_fine: cf,
        x_coarse: coarse.x,
        sign_coarse: coarse.sign.as_i8(),
        collided_coarse: cc,
    };
    rows.push(row(0, initial, false, initial, false));
    let mut subs = Vec::with_capacity(m);
    for w in 0..n_windows {
        let before = stepper.pair.coarse;
        subs.clear();
        let window = stepper.window(draws, |s| subs.push(s))?;
        for s in &subs {
            let k = w * m as u64 + s.m as u64;
            let (coarse, cc) = if s.m == m {
                (window.state, window.collided)
            } else {
                (before, false)
            };
            rows.push(row(k, s.state, s.collided, coarse, cc));
        }
    }
    Ok(rows)
}
