//! Optimal sample allocation and the bias test.

use crate::error::{domain, Result};

/// Minimum number of samples on every level.
pub const WARMUP_SAMPLES: u64 = 40;

/// `P_l = ceil(2 E^-2 sqrt(V_l / C_l) sum_k sqrt(V_k C_k))`, floored at `floor`.
pub fn allocate_samples(rmse: f64, var_cost: &[(f64, f64)], floor: u64) -> Result<Vec<u64>> {
    if !(rmse > 0.0 && rmse.is_finite()) {
        return domain(format!("rmse target must be positive, got {rmse}"));
    }
    for &(v, c) in var_cost {
        if !(v >= 0.0 && v.is_finite()) {
            return domain(format!("level variance must be finite and >= 0, got {v}"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("level cost must be positive, got {c}"));
        }
    }
    let total: f64 = var_cost.iter().map(|&(v, c)| (v * c).sqrt()).sum();
    let scale = 2.0 / (rmse * rmse) * total;
    Ok(var_cost
        .iter()
        .map(|&(v, c)| {
            let p = (scale * (v / c).sqrt()).ceil();
            // saturating: absurd targets are caught by the cost ceiling
            (if p >= u64::MAX as f64 { u64::MAX } else { p as u64 }).max(floor)
        })
        .collect())
}

/// `sum_l V_l / P_l`.
pub fn estimator_variance(variances: &[f64], samples: &[u64]) -> f64 {
    variances
        .iter()
        .zip(samples)
        .map(|(v, &p)| if p == 0 { f64::INFINITY } else { v / p as f64 })
        .sum()
}

/// Remaining-bias estimate used to decide whether a finer level is needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    /// Extrapolated `|E[F - F_L]|`.
    pub remaining: f64,
    /// Weak order used for the extrapolation.
    pub weak_order: f64,
}

/// Lowest weak order assumed when the rate is fitted from data.
pub const MIN_FITTED_ORDER: f64 = 0.5;

/// Estimates the remaining bias from the signed level means `means[l]`.
///
/// The finest level must be refined by exactly `refine`. With a fixed
/// `weak_order = a` the test is `max(|Y_L|, |Y_{L-1}| / M^a) / (M^a - 1)`.
/// Without one, `a` is the least-squares decay rate of `log_M |Y_l|` over
/// the trailing run of levels refined by `refine` (at least
/// [`MIN_FITTED_ORDER`]) and the last three levels are extrapolated. As in
/// the reference MLMC driver the look-back does not skip coarse levels, so
/// a large `|Y_l|` close to the finest level keeps the test failing.
/// Returns `None` when the finest level does not qualify.
pub fn bias_estimate(
    means: &[f64],
    refine_factors: &[Option<usize>],
    refine: usize,
    weak_order: Option<f64>,
) -> Option<BiasEstimate> {
    let last = means.len().checked_sub(1)?;
    let first = (0..means.len())
        .rev()
        .take_while(|&l| refine_factors[l] == Some(refine))
        .last()?;
    let m = refine as f64;

    let (order, lookback) = match weak_order {
        Some(a) => (a, 2),
        None => (fitted_order(&means[first..], first, m), 3),
    };
    let worst = (0..lookback.min(last + 1))
        .map(|k| means[last - k].abs() / m.powf(k as f64 * order))
        .fold(0.0, f64::max);
    // unit refinement: every difference vanishes and nothing is extrapolated
    let denom = m.powf(order) - 1.0;
    let remaining = if denom > 0.0 { worst / denom } else { worst };
    Some(BiasEstimate {
        remaining,
        weak_order: order,
    })
}

fn fitted_order(means: &[f64], offset: usize, m: f64) -> f64 {
    let pts: Vec<(f64, f64)> = means
        .iter()
        .enumerate()
        .filter(|(_, y)| **y != 0.0)
        .map(|(i, y)| ((offset + i) as f64, y.abs().ln() / m.ln()))
        .collect();
    if pts.len() < 2 || m <= 1.0 {
        return MIN_FITTED_ORDER;
    }
    (-least_squares_slope(&pts)).max(MIN_FITTED_ORDER)
}

/// Slope of the least-squares line through `pts`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
