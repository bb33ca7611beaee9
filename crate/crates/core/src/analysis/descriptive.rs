use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::model::ScoreSet;
use crate::stats;

/// Per-field summary of a score distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub field_id: String,
    pub n: usize,
    /// Percentage of researchers with a zero score.
    pub pct_zero: f64,
    pub mean: f64,
    /// `100 * sd / mean`, sample standard deviation.
    pub coeff_variation: f64,
    pub median: f64,
    pub iqr: f64,
    /// Adjusted Fisher-Pearson sample skewness.
    pub skewness: f64,
    /// Set when the distribution has zero variance (or n < 3), in which case
    /// skewness and, for an all-zero field, the CV are reported as 0.
    pub degenerate: bool,
}

pub fn descriptive_stats(set: &ScoreSet) -> Result<DescriptiveStats, AnalysisError> {
    let xs = set.scores();
    let n = xs.len();
    if n < 2 {
        return Err(AnalysisError::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = stats::mean(&xs).expect("n >= 2");
    let sd = stats::sample_sd(&xs).expect("n >= 2");
    let sorted = stats::sorted(&xs);
    let q = |p| stats::quantile_sorted(&sorted, p).expect("nonempty");

    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let degenerate = m2 <= 0.0 || n < 3;
    let skewness = if degenerate {
        0.0
    } else {
        let g1 = m3 / m2.powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    };
    let coeff_variation = if mean > 0.0 { 100.0 * sd / mean } else { 0.0 };

    Ok(DescriptiveStats {
        field_id: set.field_id().to_string(),
        n,
        pct_zero: 100.0 * set.zero_count() as f64 / nf,
        mean,
        coeff_variation,
        median: q(0.5),
        iqr: q(0.75) - q(0.25),
        skewness,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoreKind;
    use approx::assert_abs_diff_eq;

    fn set(scores: &[f64]) -> ScoreSet {
        ScoreSet::from_scores("F", scores, ScoreKind::FssStar).unwrap()
    }

    #[test]
    fn half_zero_sample() {
        let d = descriptive_stats(&set(&[0.0, 0.0, 1.0, 3.0])).unwrap();
        assert_eq!(d.pct_zero, 50.0);
        assert_eq!(d.mean, 1.0);
        assert_eq!(d.median, 0.5);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let d = descriptive_stats(&set(&[2.0, 2.0, 2.0])).unwrap();
        assert_eq!(d.coeff_variation, 0.0);
        assert_eq!(d.skewness, 0.0);
        assert!(d.degenerate);
    }

    #[test]
    fn iqr_uses_linear_interpolation() {
        // type-7 quartiles of {1,2,3,4} are 1.75 and 3.25
        let d = descriptive_stats(&set(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(d.iqr, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn skewness_matches_hand_value() {
        // {0,0,1,3}: mean 1, m2 = 1.5, m3 = 1.5, g1 = 1.5 / 1.5^1.5
        // G1 = g1 * sqrt(12) / 2
        let d = descriptive_stats(&set(&[0.0, 0.0, 1.0, 3.0])).unwrap();
        let g1 = 1.5 / 1.5f64.powf(1.5);
        assert_abs_diff_eq!(d.skewness, g1 * 12f64.sqrt() / 2.0, epsilon = 1e-12);
        // sd = sqrt(6/3)
        assert_abs_diff_eq!(d.coeff_variation, 100.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn needs_two_points() {
        assert!(matches!(descriptive_stats(&set(&[1.0])), Err(AnalysisError::InsufficientData { needed: 2, got: 1 })));
    }
}
