//! Streaming moments and Kolmogorov-Smirnov statistics.

use serde::{Deserialize, Serialize};

/// Welford accumulator for count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two disjoint accumulators (Chan et al. pairwise update).
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Sample mean; 0 when empty.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl Extend<f64> for RunningStats {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

/// Per-level moments: the fine payoff `F_l` and the difference
/// `F_l - F_{l-1}` (with `F_{-1} = 0` on the coarsest level).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub fine: RunningStats,
    pub diff: RunningStats,
}

impl LevelStats {
    #[inline]
    pub fn push(&mut self, fine: f64, coarse: f64) {
        self.fine.push(fine);
        self.diff.push(fine - coarse);
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            fine: self.fine.merge(&other.fine),
            diff: self.diff.merge(&other.diff),
        }
    }

    pub fn n_samples(&self) -> u64 {
        self.diff.count()
    }
}

/// One-sample KS statistic `sup |F_n(x) - cdf(x)|`. Sorts `xs` in place.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic. Sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the Kolmogorov distribution.
pub const KS_C_ALPHA_1PCT: f64 = 1.627_6;

/// 1% critical value for a one-sample test of size `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    KS_C_ALPHA_1PCT / (n as f64).sqrt()
}

/// 1% critical value for a two-sample test of sizes `n` and `m`.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C_ALPHA_1PCT * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.5, 7.25, 0.0, 3.5];
        let s: RunningStats = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert_relative_eq!(s.mean(), mean, max_relative = 1e-14);
        assert_relative_eq!(s.variance(), var, max_relative = 1e-14);
        assert_eq!(s.count(), 6);
    }

    #[test]
    fn degenerate_counts() {
        let mut s = RunningStats::new();
        assert_eq!(s.variance(), 0.0);
        s.push(3.0);
        assert_eq!(s.variance(), 0.0);
        assert_eq!(s.mean(), 3.0);
    }

    #[test]
    fn level_stats_difference() {
        let mut l = LevelStats::default();
        l.push(2.0, 1.5);
        l.push(4.0, 3.0);
        assert_eq!(l.n_samples(), 2);
        assert_relative_eq!(l.diff.mean(), 0.75);
        assert_relative_eq!(l.fine.mean(), 3.0);
    }

    #[test]
    fn ks_uniform_grid_is_small() {
        let mut xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&mut xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.5 / 1000.0 + 1e-12);
    }

    #[test]
    fn ks_two_sample_disjoint_is_one() {
        let mut a = vec![0.0, 1.0, 2.0];
        let mut b = vec![10.0, 11.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 1.0);
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 0.0);
    }

    proptest! {
        #[test]
        fn merge_is_associative(
            xs in prop::collection::vec(-1e3f64..1e3, 0..60),
            cut1 in 0usize..60,
            cut2 in 0usize..60,
        ) {
            let a = cut1.min(xs.len());
            let b = cut2.min(xs.len()).max(a);
            let whole: RunningStats = xs.iter().copied().collect();
            let p: RunningStats = xs[..a].iter().copied().collect();
            let q: RunningStats = xs[a..b].iter().copied().collect();
            let r: RunningStats = xs[b..].iter().copied().collect();
            for merged in [p.merge(&q).merge(&r), p.merge(&q.merge(&r))] {
                prop_assert_eq!(merged.count(), whole.count());
                let scale = whole.mean().abs().max(1.0);
                prop_assert!((merged.mean() - whole.mean()).abs() <= 1e-12 * scale);
                let vscale = whole.variance().max(1.0);
                prop_assert!((merged.variance() - whole.variance()).abs() <= 1e-9 * vscale);
            }
        }
    }
}
