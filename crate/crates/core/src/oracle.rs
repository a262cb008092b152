//! Analytic reference values for the AP scheme.
//!
//! For a particle started at the origin with a fair sign, the velocity sign
//! is a stationary Markov chain with `E[s_n s_{n+k}] = (1 - p_c)^k` and the
//! Brownian increments are independent of it, so
//!
//! ```text
//! E[X_N^2] = 2 N dt D + (v dt)^2 (N + 2 sum_{k=1}^{N-1} (N - k) (1 - p_c)^k).
//! ```
//!
//! The geometric sum has the closed form
//! `q (N p - 1 + q^N) / p^2` with `q = 1 - p`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{make_params, SchemeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub epsilon: f64,
    pub dt: f64,
    pub n_steps: u64,
}

/// `E[s_n s_{n+k}] = (1 - p_collide)^k`.
pub fn sign_autocorrelation(p_collide: f64, lag: u64) -> f64 {
    (1.0 - p_collide).powf(lag as f64)
}

/// Second moment `2 t` of the heat kernel of `d_t rho = d_xx rho`.
pub fn heat_limit_moment(t_star: f64) -> f64 {
    2.0 * t_star
}

/// Exact `E[X_N^2]` of the AP scheme.
pub fn exact_second_moment(q: MomentQuery) -> Result<f64> {
    let params = make_params(q.epsilon, q.dt)?;
    Ok(second_moment_for(&params, q.n_steps))
}

/// Exact `E[X_N^2]` for arbitrary coefficients, including the heat limit.
pub fn second_moment_for(params: &SchemeParams, n_steps: u64) -> f64 {
    if n_steps == 0 {
        return 0.0;
    }
    let n = n_steps as f64;
    let dt = params.dt();
    let diffusion = 2.0 * n * dt * params.diff_coef();
    let step = params.v_mag() * dt;
    if step == 0.0 {
        return diffusion;
    }
    let transport = step * step * (n + 2.0 * lagged_correlation_sum(params.p_collide(), n_steps));
    diffusion + transport
}

/// `sum_{k=1}^{N-1} (N - k) q^k` with `q = 1 - p`.
fn lagged_correlation_sum(p: f64, n_steps: u64) -> f64 {
    let n = n_steps as f64;
    if p == 0.0 {
        return n * (n - 1.0) / 2.0;
    }
    // below this the closed form loses digits to cancellation in N p - (1 - q^N)
    if n * p < 1e-2 {
        let q = 1.0 - p;
        let mut acc = 0.0;
        let mut qk = 1.0;
        for k in 1..n_steps {
            qk *= q;
            acc += (n - k as f64) * qk;
        }
        return acc;
    }
    let q = 1.0 - p;
    let one_minus_qn = -(n * (-p).ln_1p()).exp_m1();
    q * (n * p - one_minus_qn) / (p * p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_for, Draws, StreamKey};
    use approx::assert_relative_eq;

    /// Enumerates the 2^N collision patterns. Signs within a run of steps
    /// without a reset are equal, distinct runs are independent fair signs,
    /// so `E[(sum s_n)^2 | pattern] = sum of squared run lengths`.
    fn brute_force(epsilon: f64, dt: f64, n: u32) -> f64 {
        let p = make_params(epsilon, dt).unwrap();
        let pc = p.p_collide();
        let resets = n.saturating_sub(1); // a reset after the last transport is irrelevant
        let mut expected_sq = 0.0;
        for pattern in 0u32..(1 << resets) {
            let mut prob = 1.0;
            let mut run = 1u32;
            let mut sq = 0.0;
            for j in 0..resets {
                if pattern >> j & 1 == 1 {
                    prob *= pc;
                    sq += (run * run) as f64;
                    run = 1;
                } else {
                    prob *= 1.0 - pc;
                    run += 1;
                }
            }
            sq += (run * run) as f64;
            expected_sq += prob * sq;
        }
        let step = p.v_mag() * dt;
        2.0 * n as f64 * dt * p.diff_coef() + step * step * expected_sq
    }

    #[test]
    fn matches_enumeration_small_n() {
        for eps in [0.1, 0.5, 1.0] {
            for dt in [0.1, 0.5, 1.0] {
                for n in 1..=6 {
                    let exact = exact_second_moment(MomentQuery {
                        epsilon: eps,
                        dt,
                        n_steps: n as u64,
                    })
                    .unwrap();
                    assert_relative_eq!(exact, brute_force(eps, dt, n), max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn closed_form_agrees_with_direct_sum() {
        for p in [1e-3f64, 0.01, 0.3, 0.5, 0.9, 0.999] {
            for n in [2u64, 10, 100, 1000] {
                let direct: f64 = (1..n)
                    .map(|k| (n - k) as f64 * (1.0 - p).powi(k as i32))
                    .sum();
                assert_relative_eq!(lagged_correlation_sum(p, n), direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn level_zero_mean_at_eps_squared() {
        let m = exact_second_moment(MomentQuery {
            epsilon: 0.1,
            dt: 0.01,
            n_steps: 50,
        })
        .unwrap();
        assert!((m - 0.865).abs() < 1e-9, "{m}");
    }

    #[test]
    fn zero_steps_no_motion() {
        let q = MomentQuery {
            epsilon: 0.3,
            dt: 0.1,
            n_steps: 0,
        };
        assert_eq!(exact_second_moment(q).unwrap(), 0.0);
    }

    #[test]
    fn heat_limit() {
        assert_eq!(heat_limit_moment(0.5), 1.0);
        assert_eq!(heat_limit_moment(0.0), 0.0);
        let h = SchemeParams::heat_limit(0.1).unwrap();
        assert_relative_eq!(second_moment_for(&h, 5), 1.0, max_relative = 1e-15);
        let m = exact_second_moment(MomentQuery {
            epsilon: 1e-6,
            dt: 0.1,
            n_steps: 5,
        })
        .unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }

    #[test]
    fn tends_to_diffusive_limit_as_eps_vanishes() {
        let (dt, n) = (0.05, 20);
        let target = 2.0 * n as f64 * dt;
        let mut last_gap = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let m = exact_second_moment(MomentQuery {
                epsilon: eps,
                dt,
                n_steps: n,
            })
            .unwrap();
            let gap = (m - target).abs();
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-8);
    }

    #[test]
    fn autocorrelation_examples() {
        assert_eq!(sign_autocorrelation(0.5, 1), 0.5);
        assert_eq!(sign_autocorrelation(0.37, 0), 1.0);
        assert_relative_eq!(sign_autocorrelation(0.4444, 3), 0.5556f64.powi(3), max_relative = 1e-12);
    }

    #[test]
    fn autocorrelation_matches_monte_carlo() {
        // stationary chain started from a fair sign, lag 3
        let p = 0.4444;
        let n = 10_000_000u64;
        let mut s = stream_for(StreamKey::new(3, 0, 0));
        let mut sum = 0.0;
        for _ in 0..n {
            let s0 = s.sign().value();
            let mut cur = s0;
            for _ in 0..3 {
                if s.uniform() >= 1.0 - p {
                    cur = s.sign().value();
                }
            }
            sum += s0 * cur;
        }
        let mean = sum / n as f64;
        let target = sign_autocorrelation(p, 3);
        let se = ((1.0 - target * target) / n as f64).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target}");
        assert!((target - 0.1715).abs() < 1e-4);
    }
}
