use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::model::ScoreSet;
use crate::stats;

/// A value is an outlier when its absolute deviation from the median
/// exceeds this many MADs.
pub const DEFAULT_MAD_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldIncidence {
    pub field: String,
    pub nonzero_n: usize,
    pub outliers: usize,
    /// Percentage of the field's nonzero researchers flagged.
    pub incidence_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadOutcome {
    pub median: f64,
    pub mad: f64,
    pub threshold: f64,
    /// One flag per input point, in input order.
    pub flags: Vec<bool>,
    pub total_outliers: usize,
    /// Sorted by field id.
    pub per_field: Vec<FieldIncidence>,
}

impl MadOutcome {
    /// Spread of outlier incidence across fields, in percentage points.
    pub fn incidence_range(&self) -> f64 {
        let (lo, hi) = self
            .per_field
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.incidence_pct), hi.max(f.incidence_pct)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }
}

/// All strictly positive scores of several fields, labelled by field.
pub fn pooled_nonzero(sets: &[ScoreSet]) -> Vec<(String, f64)> {
    sets.iter().flat_map(|s| s.nonzero_scores().into_iter().map(move |x| (s.field_id().to_string(), x))).collect()
}

/// Flag `x_i` when `|x_i - median| / MAD > threshold` over the pooled
/// distribution.
pub fn mad_outliers(points: &[(String, f64)], threshold: f64) -> Result<MadOutcome, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::InsufficientData { needed: 1, got: 0 });
    }
    if let Some((_, bad)) = points.iter().find(|(_, x)| !(x.is_finite() && *x > 0.0)) {
        return Err(AnalysisError::NonPositiveScore(*bad));
    }
    let xs: Vec<f64> = points.iter().map(|(_, x)| *x).collect();
    let median = stats::median(&xs).expect("nonempty");
    let deviations: Vec<f64> = xs.iter().map(|x| (x - median).abs()).collect();
    let mad = stats::median(&deviations).expect("nonempty");
    if mad <= 0.0 {
        return Err(AnalysisError::DegenerateMad { median });
    }
    let flags: Vec<bool> = deviations.iter().map(|d| d / mad > threshold).collect();

    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for ((field, _), &flag) in points.iter().zip(&flags) {
        let t = tally.entry(field.as_str()).or_default();
        t.0 += 1;
        t.1 += usize::from(flag);
    }
    let per_field = tally
        .into_iter()
        .map(|(field, (n, outliers))| FieldIncidence {
            field: field.to_string(),
            nonzero_n: n,
            outliers,
            incidence_pct: 100.0 * outliers as f64 / n as f64,
        })
        .collect();

    Ok(MadOutcome { median, mad, threshold, total_outliers: flags.iter().filter(|f| **f).count(), flags, per_field })
}
