use serde::{Deserialize, Serialize};

use super::gpd::GpdFit;

/// Asymptotic 5% coefficient of the one-sample Kolmogorov-Smirnov statistic.
pub const KS_COEFFICIENT_5PCT: f64 = 1.358;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub critical_value_5pct: f64,
    pub reject: bool,
}

/// `1.358 / sqrt(n)`, without correction for estimated parameters.
pub fn ks_critical_value_5pct(n: usize) -> f64 {
    KS_COEFFICIENT_5PCT / (n as f64).sqrt()
}

/// `sup_x |F_n(x) - F(x)|` for a continuous (or right-continuous) `cdf`,
/// checking both sides of every empirical step.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

pub fn ks_test(scores: &[f64], fit: &GpdFit) -> KsResult {
    let dist = fit.distribution();
    let statistic = ks_statistic(scores, |x| dist.cdf(x));
    let critical_value_5pct = ks_critical_value_5pct(scores.len());
    KsResult { n: scores.len(), statistic, critical_value_5pct, reject: statistic > critical_value_5pct }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Evaluate the empirical CDF by counting at every sample point and just
    /// below it.
    fn brute_force(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let n = samples.len() as f64;
        let mut d: f64 = 0.0;
        for &x in samples {
            let at = samples.iter().filter(|&&s| s <= x).count() as f64 / n;
            let before = samples.iter().filter(|&&s| s < x).count() as f64 / n;
            d = d.max((at - cdf(x)).abs()).max((before - cdf(x)).abs());
        }
        d
    }

    #[test]
    fn published_critical_values() {
        assert_abs_diff_eq!(ks_critical_value_5pct(742), 0.050, epsilon = 0.0005);
        assert_abs_diff_eq!(ks_critical_value_5pct(1224), 0.039, epsilon = 0.0005);
        assert_abs_diff_eq!(ks_critical_value_5pct(206), 0.095, epsilon = 0.0005);
    }

    #[test]
    fn uniform_sample_against_uniform_cdf() {
        let xs = [0.1, 0.4, 0.45, 0.9];
        let cdf = |x: f64| x.clamp(0.0, 1.0);
        assert_abs_diff_eq!(ks_statistic(&xs, cdf), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(ks_statistic(&xs, cdf), brute_force(&xs, cdf), epsilon = 1e-12);
    }

    #[test]
    fn ties_match_brute_force() {
        let xs = [0.0, 0.0, 0.0, 0.2, 0.2, 0.7, 1.5];
        let cdf = |x: f64| 1.0 - (-x).exp();
        assert_abs_diff_eq!(ks_statistic(&xs, cdf), brute_force(&xs, cdf), epsilon = 1e-12);
    }

    #[test]
    fn own_step_function_within_one_over_n() {
        let xs = [3.0, 1.0, 2.0, 5.0, 4.0];
        let n = xs.len() as f64;
        let ecdf = |x: f64| xs.iter().filter(|&&s| s <= x).count() as f64 / n;
        assert!(ks_statistic(&xs, ecdf) <= 1.0 / n + 1e-12);
    }

    #[test]
    fn reject_iff_above_critical() {
        let fit = GpdFit { k: 0.0, sigma: 1.0, mu: 0.0, log_likelihood: 0.0 };
        let far: Vec<f64> = (0..50).map(|i| 10.0 + i as f64).collect();
        let r = ks_test(&far, &fit);
        assert!(r.reject && r.statistic > r.critical_value_5pct);
    }
}
