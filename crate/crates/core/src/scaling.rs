//! Field standardization by one of four scaling factors and the pooled
//! cross-field top-share analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ScoreEntry, ScoreKind, ScoreSet};
use crate::stats;

/// Per-field denominator used to bring scores onto a common scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingFactorKind {
    /// Mean over the whole field.
    MeanAll,
    /// Mean over researchers with a positive score.
    MeanNonzero,
    /// Median over the whole field.
    MedianAll,
    /// Median over researchers with a positive score.
    MedianNonzero,
}

impl ScalingFactorKind {
    pub const ALL: [ScalingFactorKind; 4] = [
        ScalingFactorKind::MeanAll,
        ScalingFactorKind::MeanNonzero,
        ScalingFactorKind::MedianAll,
        ScalingFactorKind::MedianNonzero,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScalingFactorKind::MeanAll => "mean_all",
            ScalingFactorKind::MeanNonzero => "mean_nonzero",
            ScalingFactorKind::MedianAll => "median_all",
            ScalingFactorKind::MedianNonzero => "median_nonzero",
        }
    }
}

impl fmt::Display for ScalingFactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScalingFactorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScalingFactorKind::ALL.into_iter().find(|k| k.label() == s).ok_or_else(|| {
            format!("unknown scaling factor `{s}` (expected mean_all, mean_nonzero, median_all or median_nonzero)")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("field {0}: empty score set")]
    EmptyField(String),
    #[error("field {field}: {kind} denominator is zero or undefined")]
    ZeroDenominator { field: String, kind: ScalingFactorKind },
    #[error("cannot pool score sets of different kinds ({0:?} and {1:?})")]
    MixedKinds(ScoreKind, ScoreKind),
    #[error("top fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("empty ranking")]
    EmptyRanking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldScalingStats {
    pub field_id: String,
    pub n: usize,
    pub n_zero: usize,
    pub mean: f64,
    /// `None` when every score is zero.
    pub mean_nonzero: Option<f64>,
    pub median: f64,
    pub median_nonzero: Option<f64>,
}

impl FieldScalingStats {
    pub fn denominator(&self, kind: ScalingFactorKind) -> Option<f64> {
        match kind {
            ScalingFactorKind::MeanAll => Some(self.mean),
            ScalingFactorKind::MeanNonzero => self.mean_nonzero,
            ScalingFactorKind::MedianAll => Some(self.median),
            ScalingFactorKind::MedianNonzero => self.median_nonzero,
        }
        .filter(|d| *d > 0.0)
    }
}

pub fn field_scaling_stats(set: &ScoreSet) -> Result<FieldScalingStats, ScalingError> {
    if set.is_empty() {
        return Err(ScalingError::EmptyField(set.field_id().to_string()));
    }
    let all = set.scores();
    let positive = set.nonzero_scores();
    Ok(FieldScalingStats {
        field_id: set.field_id().to_string(),
        n: all.len(),
        n_zero: all.len() - positive.len(),
        mean: stats::mean(&all).expect("nonempty"),
        mean_nonzero: stats::mean(&positive),
        median: stats::median(&all).expect("nonempty"),
        median_nonzero: stats::median(&positive),
    })
}

/// Divide every score of the field by its selected denominator.
pub fn standardize(set: &ScoreSet, kind: ScalingFactorKind) -> Result<ScoreSet, ScalingError> {
    let stats = field_scaling_stats(set)?;
    let denom = stats
        .denominator(kind)
        .ok_or_else(|| ScalingError::ZeroDenominator { field: set.field_id().to_string(), kind })?;
    let entries =
        set.entries().iter().map(|e| ScoreEntry { researcher: e.researcher.clone(), score: e.score / denom }).collect();
    Ok(ScoreSet::new(set.field_id(), entries, ScoreKind::Standardized(kind)).expect("scaling keeps scores valid"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub researcher: String,
    pub field: String,
    pub score: f64,
    /// 1-based competition rank: tied scores share the best rank.
    pub rank: usize,
}

/// Pool several fields into one descending ranking.
pub fn pooled_ranking(sets: &[ScoreSet]) -> Result<Vec<RankedEntry>, ScalingError> {
    if let Some(first) = sets.first() {
        if let Some(other) = sets.iter().find(|s| s.kind() != first.kind()) {
            return Err(ScalingError::MixedKinds(first.kind(), other.kind()));
        }
    }
    let mut pooled: Vec<RankedEntry> = sets
        .iter()
        .flat_map(|s| {
            s.entries().iter().map(|e| RankedEntry {
                researcher: e.researcher.clone(),
                field: s.field_id().to_string(),
                score: e.score,
                rank: 0,
            })
        })
        .collect();
    pooled.sort_by(|a, b| b.score.total_cmp(&a.score));
    for i in 0..pooled.len() {
        pooled[i].rank = if i > 0 && pooled[i].score == pooled[i - 1].score { pooled[i - 1].rank } else { i + 1 };
    }
    Ok(pooled)
}

/// Reference size for the admissible-share band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandMode {
    /// Binomial band from each field's own size.
    PerField,
    /// One reference size for every field.
    Fixed(usize),
}

/// `p +/- sqrt(p (1 - p) / n)`.
pub fn admissible_band(p: f64, n: usize) -> (f64, f64) {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    (p - sd, p + sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTopShare {
    pub field: String,
    pub field_size: usize,
    pub marked: usize,
    /// Fraction of the field inside the global top set.
    pub share: f64,
    pub band_lower: f64,
    pub band_upper: f64,
}

impl FieldTopShare {
    pub fn within_band(&self) -> bool {
        self.share >= self.band_lower && self.share <= self.band_upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopShareReport {
    pub p: f64,
    /// `floor(p * N)`.
    pub cutoff: usize,
    /// Researchers in the top set, boundary ties included.
    pub marked: usize,
    pub total: usize,
    /// Sorted by field id.
    pub fields: Vec<FieldTopShare>,
}

impl TopShareReport {
    pub fn band_violations(&self) -> usize {
        self.fields.iter().filter(|f| !f.within_band()).count()
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.fields.iter().map(|f| (f.share - self.p).abs()).fold(0.0, f64::max)
    }
}

/// Mark the global top `floor(p * N)` (ties at the boundary included) and
/// report each field's share of it against its admissible band.
pub fn top_share(ranking: &[RankedEntry], p: f64, band: BandMode) -> Result<TopShareReport, ScalingError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ScalingError::InvalidFraction(p));
    }
    if ranking.is_empty() {
        return Err(ScalingError::EmptyRanking);
    }
    let total = ranking.len();
    let cutoff = (p * total as f64).floor() as usize;
    let mut per_field: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut marked_total = 0;
    for entry in ranking {
        let counts = per_field.entry(entry.field.as_str()).or_default();
        counts.0 += 1;
        if entry.rank <= cutoff {
            counts.1 += 1;
            marked_total += 1;
        }
    }
    let fields = per_field
        .into_iter()
        .map(|(field, (size, marked))| {
            let n_ref = match band {
                BandMode::PerField => size,
                BandMode::Fixed(n) => n,
            };
            let (band_lower, band_upper) = admissible_band(p, n_ref);
            FieldTopShare {
                field: field.to_string(),
                field_size: size,
                marked,
                share: marked as f64 / size as f64,
                band_lower,
                band_upper,
            }
        })
        .collect();
    Ok(TopShareReport { p, cutoff, marked: marked_total, total, fields })
}
