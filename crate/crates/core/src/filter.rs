//! Asymmetric Gaussian filtering of RSSI sample series.
//!
//! Samples outside `[mu - g_inf * sigma, mu + g_sup * sigma]` are rejected.
//! The two multipliers are fitted independently: the pair with the smallest
//! `g_inf + g_sup` whose interval still holds at least `1 - epsilon` of the
//! fitting samples. Deep fades make the low tail much heavier than the high
//! tail, so the fitted interval is usually lopsided.
//!
//! The distribution is the empirical one of the fitting samples, and the
//! search runs over a fixed grid of multipliers, so a fit is deterministic.

use crate::error::{Error, Result};

/// Minimum sample count accepted by [`fit_asymmetric_bounds`].
pub const MIN_FIT_SAMPLES: usize = 10;

/// Multiplier used when a series is too short to fit.
pub const FALLBACK_G: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub g_inf: f64,
    pub g_sup: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl FilterParams {
    /// Bounds with fixed multipliers around the given statistics.
    pub fn with_bounds(stats: SampleStats, g_inf: f64, g_sup: f64, epsilon: f64) -> Self {
        Self {
            g_inf,
            g_sup,
            epsilon,
            mu: stats.mu,
            sigma: stats.sigma,
        }
    }

    /// Same multipliers and spread around a different centre.
    pub fn recentered(&self, mu: f64) -> Self {
        Self { mu, ..*self }
    }

    pub fn lower(&self) -> f64 {
        self.mu - self.g_inf * self.sigma
    }

    pub fn upper(&self) -> f64 {
        self.mu + self.g_sup * self.sigma
    }

    /// Closed-interval membership.
    #[inline]
    pub fn accepts(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }
}

/// Search grid for the multipliers: `{0, step, 2 step, ..., g_max}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitGrid {
    pub step: f64,
    pub g_max: f64,
}

impl Default for FitGrid {
    fn default() -> Self {
        Self { step: 0.01, g_max: 6.0 }
    }
}

impl FitGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.g_max >= 0.0) || !self.g_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid step {} / g_max {}",
                self.step, self.g_max
            )));
        }
        Ok(())
    }

    /// Index of the last grid value (`g_max / step`, rounded).
    pub fn last_index(&self) -> usize {
        (self.g_max / self.step).round() as usize
    }

    /// Grid value at index `i`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        i as f64 * self.step
    }
}

/// The coverage constraint: `inside / total >= 1 - epsilon`.
#[inline]
pub fn meets_coverage(inside: usize, total: usize, epsilon: f64) -> bool {
    inside as f64 >= (1.0 - epsilon) * total as f64
}

pub fn empirical_stats(samples: &[f64]) -> Result<SampleStats> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteRssi(i));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    Ok(SampleStats {
        mu,
        sigma: var.sqrt(),
        count: samples.len(),
    })
}

/// Fits `(g_inf, g_sup)` on `grid`, minimising `g_inf + g_sup` under the
/// coverage constraint. Ties go to the smaller `g_sup`, then the smaller `g_inf`.
pub fn fit_asymmetric_bounds(samples: &[f64], epsilon: f64, grid: FitGrid) -> Result<FilterParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} not in (0, 1)")));
    }
    grid.validate()?;
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    let stats = empirical_stats(samples)?;
    if stats.sigma == 0.0 {
        return Ok(FilterParams::with_bounds(stats, 0.0, 0.0, epsilon));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let total = sorted.len();
    let inside = |lo: f64, hi: f64| -> usize {
        let upto = sorted.partition_point(|&x| x <= hi);
        let below = sorted.partition_point(|&x| x < lo);
        upto.saturating_sub(below)
    };

    let last = grid.last_index();
    let upper_at = |j: usize| stats.mu + grid.value(j) * stats.sigma;

    // For a fixed g_inf, coverage is monotone in g_sup, so the optimum pairs
    // each g_inf with its smallest feasible g_sup.
    let mut best: Option<(usize, usize)> = None;
    for i in 0..=last {
        if let Some((bi, bj)) = best {
            if i > bi + bj {
                break;
            }
        }
        let lo = stats.mu - grid.value(i) * stats.sigma;
        if !meets_coverage(inside(lo, upper_at(last)), total, epsilon) {
            continue;
        }
        let (mut a, mut b) = (0usize, last);
        while a < b {
            let mid = (a + b) / 2;
            if meets_coverage(inside(lo, upper_at(mid)), total, epsilon) {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        let j = a;
        let better = match best {
            None => true,
            Some((bi, bj)) => (i + j, j) < (bi + bj, bj),
        };
        if better {
            best = Some((i, j));
        }
    }

    let (i, j) = best.ok_or(Error::InfeasibleCoverage { epsilon })?;
    Ok(FilterParams::with_bounds(stats, grid.value(i), grid.value(j), epsilon))
}

/// Samples inside the closed acceptance interval, in input order.
pub fn apply_filter(samples: &[f64], params: &FilterParams) -> Vec<f64> {
    samples.iter().copied().filter(|&x| params.accepts(x)).collect()
}

/// Mean of the retained samples, or `params.mu` when nothing is retained.
pub fn filtered_mean(samples: &[f64], params: &FilterParams) -> f64 {
    let (sum, count) = samples
        .iter()
        .filter(|&&x| params.accepts(x))
        .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
    if count == 0 {
        params.mu
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive grid scan with linear coverage counting.
    fn oracle_best(samples: &[f64], epsilon: f64, grid: FitGrid) -> Option<(usize, usize)> {
        let n = samples.len() as f64;
        let mu = samples.iter().sum::<f64>() / n;
        let sigma = (samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
        let last = grid.last_index();
        let mut best: Option<(usize, usize)> = None;
        for i in 0..=last {
            for j in 0..=last {
                let lo = mu - grid.value(i) * sigma;
                let hi = mu + grid.value(j) * sigma;
                let c = samples.iter().filter(|&&x| x >= lo && x <= hi).count();
                if c as f64 >= (1.0 - epsilon) * n {
                    let better = match best {
                        None => true,
                        Some((bi, bj)) => (i + j, j) < (bi + bj, bj),
                    };
                    if better {
                        best = Some((i, j));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn stats_constant_and_two_point() {
        let s = empirical_stats(&[-60.0; 5]).unwrap();
        assert_eq!((s.mu, s.sigma, s.count), (-60.0, 0.0, 5));
        let s = empirical_stats(&[-58.0, -62.0]).unwrap();
        assert_eq!((s.mu, s.sigma), (-60.0, 2.0));
        assert_eq!(empirical_stats(&[]), Err(Error::EmptySamples));
    }

    #[test]
    fn fit_symmetric_five_point_matches_oracle() {
        // padded to ten samples by repetition
        let base = [-62.0, -61.0, -60.0, -59.0, -58.0];
        let samples: Vec<f64> = base.iter().chain(base.iter()).copied().collect();
        let grid = FitGrid::default();
        let p = fit_asymmetric_bounds(&samples, 0.2, grid).unwrap();
        let (i, j) = oracle_best(&samples, 0.2, grid).unwrap();
        assert_eq!((p.g_inf, p.g_sup), (grid.value(i), grid.value(j)));
        let kept = apply_filter(&samples, &p).len();
        assert!(meets_coverage(kept, samples.len(), 0.2));
    }

    #[test]
    fn fit_constant_is_degenerate() {
        let p = fit_asymmetric_bounds(&[-60.0; 20], 0.1, FitGrid::default()).unwrap();
        assert_eq!((p.g_inf, p.g_sup, p.sigma), (0.0, 0.0, 0.0));
        assert_eq!(apply_filter(&[-60.0; 20], &p).len(), 20);
    }

    #[test]
    fn fit_rejects_short_and_bad_epsilon() {
        assert!(matches!(
            fit_asymmetric_bounds(&[-60.0; 9], 0.1, FitGrid::default()),
            Err(Error::TooFewSamples { got: 9, need: 10 })
        ));
        assert!(fit_asymmetric_bounds(&[-60.0; 20], 0.0, FitGrid::default()).is_err());
        assert!(fit_asymmetric_bounds(&[-60.0; 20], 1.0, FitGrid::default()).is_err());
    }

    #[test]
    fn fit_heavy_left_tail_is_lopsided() {
        let mut samples = vec![];
        for i in 0..80 {
            samples.push(-60.0 + ((i % 5) as f64 - 2.0) * 0.5);
        }
        for i in 0..20 {
            samples.push(-75.0 - (i % 4) as f64);
        }
        let p = fit_asymmetric_bounds(&samples, 0.1, FitGrid::default()).unwrap();
        assert!(p.g_inf > p.g_sup, "{p:?}");
    }

    #[test]
    fn infeasible_when_tail_beyond_grid() {
        // 1 of 10 samples far away, epsilon too small to drop it, grid capped at 1 sigma
        let mut s = vec![0.0; 9];
        s.push(100.0);
        let grid = FitGrid { step: 0.5, g_max: 1.0 };
        assert_eq!(
            fit_asymmetric_bounds(&s, 0.01, grid),
            Err(Error::InfeasibleCoverage { epsilon: 0.01 })
        );
    }

    #[test]
    fn apply_filter_wide_bounds_is_noop() {
        let s = [-61.0, -59.0, -60.5, -60.0];
        let stats = empirical_stats(&s).unwrap();
        let p = FilterParams::with_bounds(stats, 6.0, 6.0, 0.05);
        assert_eq!(apply_filter(&s, &p), s.to_vec());
    }

    #[test]
    fn single_fade_dropped() {
        // mu = -70, sigma = 14.142; -90 sits 1.414 sigma below, -60 0.707 above
        let mut s = vec![];
        for _ in 0..4 {
            s.extend_from_slice(&[-60.0, -60.0, -90.0]);
        }
        let p = fit_asymmetric_bounds(&s, 0.34, FitGrid::default()).unwrap();
        assert_eq!(apply_filter(&s, &p), vec![-60.0; 8]);
        assert_eq!(filtered_mean(&s, &p), -60.0);
        assert_eq!(
            filtered_mean(
                &[-42.0; 12],
                &fit_asymmetric_bounds(&[-42.0; 12], 0.1, FitGrid::default()).unwrap()
            ),
            -42.0
        );
    }

    #[test]
    fn filtered_mean_empty_falls_back_to_mu() {
        let p = FilterParams {
            g_inf: 0.0,
            g_sup: 0.0,
            epsilon: 0.1,
            mu: -55.0,
            sigma: 1.0,
        };
        assert_eq!(filtered_mean(&[-70.0, -71.0], &p), -55.0);
    }
}
