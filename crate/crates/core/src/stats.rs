//! Binomial proportions, standard errors and order-statistic intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Fraction of successes with its binomial standard error and Wilson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Proportion {
    pub fn new(successes: usize, trials: usize) -> Self {
        let (lo, hi) = wilson_interval(successes, trials, Z95);
        let p = if trials > 0 {
            successes as f64 / trials as f64
        } else {
            0.0
        };
        Self {
            successes,
            trials,
            estimate: p,
            std_err: binomial_std_err(p, trials),
            ci_lo: lo,
            ci_hi: hi,
        }
    }
}

pub fn binomial_std_err(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Wilson score interval; `(0, 1)` for zero trials.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// `sqrt(a^2 + b^2)`.
pub fn combined_std_err(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the sample mean.
pub fn mean_std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Distribution-free 95% interval for the median from order statistics:
/// ranks `n/2 -+ z sqrt(n)/2`, clamped to the sample. `xs` need not be sorted;
/// infinite entries are allowed.
pub fn median_interval(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let half = Z95 * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor().max(1.0) as usize).min(n) - 1;
    let hi = ((n as f64 / 2.0 + half).ceil() as usize).clamp(1, n) - 1;
    (s[lo], s[hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson_interval(0, 200, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.02);
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn proportion_fields() {
        let p = Proportion::new(30, 120);
        assert_eq!(p.estimate, 0.25);
        assert!((p.std_err - (0.25f64 * 0.75 / 120.0).sqrt()).abs() < 1e-15);
        assert!(p.ci_lo < 0.25 && 0.25 < p.ci_hi);
    }

    #[test]
    fn median_interval_contains_median() {
        let xs: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let (lo, hi) = median_interval(&xs);
        assert!(lo < 50.0 && 50.0 < hi);
        assert!(hi - lo < 25.0);
    }
}
