//! Particle time stepping for the two-velocity Goldstein-Taylor model.
//!
//! Two steppers are provided:
//!
//! * the asymptotic-preserving (AP) scheme, whose velocity magnitude,
//!   diffusion coefficient and collision probability all depend on `dt`
//!   and which is stable for every `dt > 0`;
//! * the classical scheme with velocities `±1/epsilon`, valid only for
//!   `dt <= epsilon^2`.
//!
//! One AP time step is a transport-diffusion step followed by a collision
//! step. All randomness is passed in by the caller, so a trajectory can be
//! replayed exactly from a recorded set of draws.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::Draws;

/// Direction of a particle's velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i8(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => domain(format!("sign must be -1 or +1, got {v}")),
        }
    }
}

/// Coefficients of the AP scheme for one `(epsilon, dt)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    epsilon: f64,
    dt: f64,
    v_mag: f64,
    diff_coef: f64,
    p_collide: f64,
    p_no_collide: f64,
}

impl SchemeParams {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Velocity magnitude `epsilon / (epsilon^2 + dt)`.
    pub fn v_mag(&self) -> f64 {
        self.v_mag
    }

    /// Diffusion coefficient `dt / (epsilon^2 + dt)`.
    pub fn diff_coef(&self) -> f64 {
        self.diff_coef
    }

    /// Collision probability per step, `dt / (epsilon^2 + dt)`.
    pub fn p_collide(&self) -> f64 {
        self.p_collide
    }

    pub fn p_no_collide(&self) -> f64 {
        self.p_no_collide
    }

    /// Pure-diffusion limit (`epsilon -> 0`): no drift, unit diffusion,
    /// collision on every step. `epsilon()` reports 0.
    pub fn heat_limit(dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt >= 0.0) {
            return domain(format!("dt must be finite and >= 0, got {dt}"));
        }
        Ok(Self {
            epsilon: 0.0,
            dt,
            v_mag: 0.0,
            diff_coef: 1.0,
            p_collide: 1.0,
            p_no_collide: 0.0,
        })
    }

    /// Same scheme with the drift term removed (diffusion-only paths).
    pub fn without_drift(mut self) -> Self {
        self.v_mag = 0.0;
        self
    }

    /// Same scheme with the Brownian term removed (transport-only paths).
    pub fn without_diffusion(mut self) -> Self {
        self.diff_coef = 0.0;
        self
    }

    /// Collision test: a collision happens iff `alpha >= p_no_collide`.
    #[inline]
    pub fn collides(&self, alpha: f64) -> bool {
        alpha >= self.p_no_collide
    }

    #[inline]
    fn noise_scale(&self) -> f64 {
        (2.0 * self.dt).sqrt() * self.diff_coef.sqrt()
    }
}

/// Builds the AP coefficients. `dt = 0` is accepted for limit checks and
/// yields the classical velocity `1/epsilon` with no collisions.
pub fn make_params(epsilon: f64, dt: f64) -> Result<SchemeParams> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return domain(format!("epsilon must be finite and > 0, got {epsilon}"));
    }
    if !dt.is_finite() || dt < 0.0 {
        return domain(format!("dt must be finite and >= 0, got {dt}"));
    }
    let eps2 = epsilon * epsilon;
    let denom = eps2 + dt;
    let p_collide = dt / denom;
    Ok(SchemeParams {
        epsilon,
        dt,
        v_mag: epsilon / denom,
        diff_coef: p_collide,
        p_collide,
        p_no_collide: 1.0 - p_collide,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: f64,
    pub sign: Sign,
}

impl ParticleState {
    pub fn new(x: f64, sign: Sign) -> Self {
        Self { x, sign }
    }

    /// Actual velocity under `params`.
    pub fn velocity(&self, params: &SchemeParams) -> f64 {
        self.sign.value() * params.v_mag
    }
}

/// `x' = x + sign * v_mag * dt + sqrt(2 dt) * sqrt(D) * xi`.
#[inline]
pub fn ap_transport_diffusion_step(
    state: ParticleState,
    params: &SchemeParams,
    xi: f64,
) -> ParticleState {
    ParticleState {
        x: state.x + state.sign.value() * params.v_mag * params.dt + params.noise_scale() * xi,
        sign: state.sign,
    }
}

/// Resets the sign to `sign_draw` iff `alpha >= p_no_collide`.
pub fn ap_collision_step(
    state: ParticleState,
    params: &SchemeParams,
    alpha: f64,
    sign_draw: Sign,
) -> Result<ParticleState> {
    check_alpha(alpha)?;
    Ok(collide(state, params, alpha, sign_draw))
}

#[inline]
pub(crate) fn collide(
    state: ParticleState,
    params: &SchemeParams,
    alpha: f64,
    sign_draw: Sign,
) -> ParticleState {
    if params.collides(alpha) {
        ParticleState {
            x: state.x,
            sign: sign_draw,
        }
    } else {
        state
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        domain(format!("alpha must lie in [0, 1], got {alpha}"))
    }
}

/// One step of the classical scheme: transport with velocity
/// `sign / epsilon`, then a collision with probability `dt / epsilon^2`.
pub fn classical_step(
    state: ParticleState,
    epsilon: f64,
    dt: f64,
    alpha: f64,
    sign_draw: Sign,
) -> Result<ParticleState> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return domain(format!("epsilon must be finite and > 0, got {epsilon}"));
    }
    if !dt.is_finite() || dt < 0.0 {
        return domain(format!("dt must be finite and >= 0, got {dt}"));
    }
    check_alpha(alpha)?;
    let eps2 = epsilon * epsilon;
    if dt > eps2 {
        return Err(Error::StabilityDomain { dt, eps2 });
    }
    let x = state.x + state.sign.value() / epsilon * dt;
    let p_no_collide = 1.0 - dt / eps2;
    let sign = if alpha >= p_no_collide {
        sign_draw
    } else {
        state.sign
    };
    Ok(ParticleState { x, sign })
}

/// Advances one AP step, consuming draws in the order
/// `xi`, `alpha`, then `sign` only if a collision occurs.
///
/// Returns the new state and whether a collision happened.
#[inline]
pub fn ap_step<D: Draws>(
    state: ParticleState,
    params: &SchemeParams,
    draws: &mut D,
) -> (ParticleState, StepDraws) {
    let xi = draws.normal();
    let moved = ap_transport_diffusion_step(state, params, xi);
    let alpha = draws.uniform();
    if params.collides(alpha) {
        let sign = draws.sign();
        (
            ParticleState { x: moved.x, sign },
            StepDraws {
                xi,
                alpha,
                collided: true,
            },
        )
    } else {
        (
            moved,
            StepDraws {
                xi,
                alpha,
                collided: false,
            },
        )
    }
}

/// The draws consumed by one AP step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDraws {
    pub xi: f64,
    pub alpha: f64,
    pub collided: bool,
}

/// Runs `n_steps` AP steps from `initial` and returns the terminal state.
pub fn simulate_path<D: Draws>(
    initial: ParticleState,
    params: &SchemeParams,
    n_steps: u64,
    draws: &mut D,
) -> Result<ParticleState> {
    if n_steps == 0 {
        return domain("n_steps must be >= 1");
    }
    let mut state = initial;
    for _ in 0..n_steps {
        state = ap_step(state, params, draws).0;
    }
    Ok(state)
}

/// Runs `n_steps` classical steps. Draw order per step: `alpha`, then
/// `sign` only on collision.
pub fn simulate_classical_path<D: Draws>(
    initial: ParticleState,
    epsilon: f64,
    dt: f64,
    n_steps: u64,
    draws: &mut D,
) -> Result<ParticleState> {
    if n_steps == 0 {
        return domain("n_steps must be >= 1");
    }
    let eps2 = epsilon * epsilon;
    if dt > eps2 {
        return Err(Error::StabilityDomain { dt, eps2 });
    }
    let p_no_collide = 1.0 - dt / eps2;
    let mut state = initial;
    for _ in 0..n_steps {
        let alpha = draws.uniform();
        let sign_draw = if alpha >= p_no_collide {
            draws.sign()
        } else {
            state.sign
        };
        state = classical_step(state, epsilon, dt, alpha, sign_draw)?;
    }
    Ok(state)
}

/// Quantity of interest: a payoff of the terminal position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Qoi {
    /// `F(x) = x^2`.
    #[default]
    SquaredPosition,
    /// `F(x) = x`.
    Position,
    /// `F(x) = |x|`.
    AbsPosition,
}

impl Qoi {
    pub const ALL: [Qoi; 3] = [Qoi::SquaredPosition, Qoi::Position, Qoi::AbsPosition];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Qoi::SquaredPosition => x * x,
            Qoi::Position => x,
            Qoi::AbsPosition => x.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Qoi::SquaredPosition => "x2",
            Qoi::Position => "x",
            Qoi::AbsPosition => "abs",
        }
    }
}

impl fmt::Display for Qoi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Qoi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2" | "x^2" | "square" | "squared-position" => Ok(Qoi::SquaredPosition),
            "x" | "position" => Ok(Qoi::Position),
            "abs" | "|x|" | "abs-position" => Ok(Qoi::AbsPosition),
            other => Err(Error::Config(format!(
                "unknown qoi {other:?} (expected one of x2, x, abs)"
            ))),
        }
    }
}

/// Law of a particle's initial state.
#[derive(Debug, Clone, Copy, Default)]
pub enum InitialCondition {
    /// At the origin with a fair random sign.
    #[default]
    OriginFairSign,
    Fixed(ParticleState),
    /// Arbitrary sampler; it draws from the trajectory's own stream.
    Sampler(fn(&mut dyn Draws) -> ParticleState),
}

impl InitialCondition {
    pub fn sample<D: Draws>(&self, draws: &mut D) -> ParticleState {
        match self {
            InitialCondition::OriginFairSign => ParticleState::new(0.0, draws.sign()),
            InitialCondition::Fixed(s) => *s,
            InitialCondition::Sampler(f) => f(draws),
        }
    }
}
