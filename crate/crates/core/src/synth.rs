//! Seeded synthetic FSS* populations and the harness that scores the four
//! scaling factors against each other.
//!
//! Each field holds `floor(zero_share * n)` non-productive researchers plus
//! generalized Pareto draws (negative draws clamped to zero). Every field gets
//! its own ChaCha8 stream derived from the run seed and the field index, so
//! output does not depend on evaluation order.

use std::collections::BTreeMap;

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{mad_outliers, pooled_nonzero, Gpd};
use crate::model::{AcademicRank, ScoreEntry, ScoreKind, ScoreSet};
use crate::scaling::{
    pooled_ranking, standardize, top_share, BandMode, ScalingError, ScalingFactorKind, TopShareReport,
};
use crate::stats;

/// Name of the generator behind every synthetic stream.
pub const RNG_ALGORITHM: &str = "chacha8";

pub const DEFAULT_TOP_FRACTIONS: [f64; 3] = [0.05, 0.10, 0.20];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("field {field}: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("unsupported rng `{0}`, only `{RNG_ALGORITHM}` is available")]
    UnsupportedRng(String),
    #[error("need at least 2 fields, got {0}")]
    TooFewFields(usize),
    #[error("spec file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
}

fn default_rank_mix() -> BTreeMap<AcademicRank, f64> {
    BTreeMap::from([(AcademicRank::AssistantProbationary, 1.0)])
}

/// Generator parameters for one synthetic field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(rename = "id")]
    pub field_id: String,
    pub n: usize,
    pub zero_share: f64,
    pub k: f64,
    pub sigma: f64,
    pub mu: f64,
    /// Relative weights of academic ranks among the field's researchers.
    #[serde(default = "default_rank_mix")]
    pub rank_mix: BTreeMap<AcademicRank, f64>,
}

impl FieldSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |reason: &str| SynthError::InvalidSpec { field: self.field_id.clone(), reason: reason.into() };
        if self.n == 0 {
            return Err(invalid("n must be >= 1"));
        }
        if !(self.zero_share >= 0.0 && self.zero_share < 1.0) {
            return Err(invalid("zero_share must lie in [0, 1)"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma must be > 0"));
        }
        if !(self.k.is_finite() && self.mu.is_finite()) {
            return Err(invalid("k and mu must be finite"));
        }
        if self.rank_mix.values().any(|w| !(*w >= 0.0 && w.is_finite())) || self.rank_mix.values().sum::<f64>() <= 0.0 {
            return Err(invalid("rank_mix weights must be >= 0 with a positive total"));
        }
        Ok(())
    }

    pub fn gpd(&self) -> Gpd {
        Gpd::new(self.k, self.sigma, self.mu)
    }
}

/// Contents of a `specs.toml` file: `rng = "chacha8"` plus `[[field]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(default = "default_rng")]
    pub rng: String,
    #[serde(rename = "field")]
    pub fields: Vec<FieldSpec>,
}

fn default_rng() -> String {
    RNG_ALGORITHM.to_string()
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let file: SpecFile = toml::from_str(text)?;
        if file.rng != RNG_ALGORITHM {
            return Err(SynthError::UnsupportedRng(file.rng));
        }
        for f in &file.fields {
            f.validate()?;
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec file serializes")
    }
}

/// Synthetic field: standardizable scores plus the rank of each researcher.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticField {
    pub scores: ScoreSet,
    pub ranks: Vec<AcademicRank>,
}

/// Stream seed for one field: the run seed mixed with a digest of the
/// field's generator parameters. Fields with identical parameters draw
/// identical scores, and the order of fields does not matter.
fn field_seed(seed: u64, spec: &FieldSpec) -> u64 {
    let mut h = Sha256::new();
    h.update(spec.n.to_le_bytes());
    for v in [spec.zero_share, spec.k, spec.sigma, spec.mu] {
        h.update(v.to_bits().to_le_bytes());
    }
    for (rank, w) in &spec.rank_mix {
        h.update(rank.label().as_bytes());
        h.update(w.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    let param = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    // splitmix64 finalizer
    let mut z = seed ^ param.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn generate_field(spec: &FieldSpec, seed: u64) -> SyntheticField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gpd = spec.gpd();
    let zeros = (spec.zero_share * spec.n as f64).floor() as usize;
    let entries: Vec<ScoreEntry> = (0..spec.n)
        .map(|i| {
            let score = if i < zeros {
                0.0
            } else {
                // u in (0, 1]
                let u = 1.0 - rng.random::<f64>();
                gpd.from_survival(u).max(0.0)
            };
            ScoreEntry { researcher: format!("{}-{:05}", spec.field_id, i + 1), score }
        })
        .collect();
    let (ranks, weights): (Vec<AcademicRank>, Vec<f64>) = spec.rank_mix.iter().map(|(r, w)| (*r, *w)).unzip();
    let pick = WeightedIndex::new(&weights).expect("validated rank mix");
    let ranks = (0..spec.n).map(|_| ranks[pick.sample(&mut rng)]).collect();
    SyntheticField {
        scores: ScoreSet::new(&spec.field_id, entries, ScoreKind::FssStar).expect("clamped draws are >= 0"),
        ranks,
    }
}

/// One synthetic FSS* score set per spec, reproducible from `seed`.
pub fn generate_population(specs: &[FieldSpec], seed: u64) -> Result<Vec<SyntheticField>, SynthError> {
    for s in specs {
        s.validate()?;
    }
    Ok(specs.par_iter().map(|s| generate_field(s, field_seed(seed, s))).collect())
}

/// Published per-field figures behind the default benchmark: size, share of
/// zero scores, and the fitted (k, sigma, mu) of the field's discipline.
const BENCHMARK_FIELDS: [(&str, usize, f64, (f64, f64, f64)); 18] = {
    const AGR: (f64, f64, f64) = (0.501, 0.047, -0.012);
    const BIO: (f64, f64, f64) = (0.368, 0.103, -0.008);
    const CHIM: (f64, f64, f64) = (0.360, 0.199, 0.003);
    const FIS: (f64, f64, f64) = (0.290, 0.129, -0.012);
    const GEO: (f64, f64, f64) = (0.308, 0.064, -0.010);
    const ICAR: (f64, f64, f64) = (0.490, 0.092, -0.019);
    const ING: (f64, f64, f64) = (0.371, 0.126, -0.020);
    const MAT: (f64, f64, f64) = (0.436, 0.113, -0.024);
    const MED: (f64, f64, f64) = (0.427, 0.135, 0.027);
    [
        ("AGR/20", 55, 0.127, AGR),
        ("AGR/02", 206, 0.379, AGR),
        ("BIO/08", 90, 0.333, BIO),
        ("BIO/10", 991, 0.079, BIO),
        ("CHIM/12", 73, 0.137, CHIM),
        ("CHIM/06", 742, 0.042, CHIM),
        ("FIS/06", 68, 0.118, FIS),
        ("FIS/01", 1114, 0.111, FIS),
        ("GEO/11", 61, 0.262, GEO),
        ("GEO/02", 216, 0.213, GEO),
        ("ICAR/03", 95, 0.274, ICAR),
        ("ICAR/08", 375, 0.296, ICAR),
        ("ING-IND/26", 43, 0.163, ING),
        ("ING-INF/05", 673, 0.189, ING),
        ("MAT/01", 41, 0.390, MAT),
        ("MAT/05", 942, 0.307, MAT),
        ("MED/37", 46, 0.130, MED),
        ("MED/09", 1224, 0.176, MED),
    ]
};

/// The 18-field benchmark. Fields without their own fitted parameters reuse
/// those of the largest field in the same discipline. The explicit zero share
/// is set so that, together with draws clamped at zero, the expected share
/// of zero scores equals the published one.
pub fn benchmark_specs() -> Vec<FieldSpec> {
    BENCHMARK_FIELDS
        .iter()
        .map(|&(id, n, target_zero, (k, sigma, mu))| {
            let clamped = Gpd::new(k, sigma, mu).cdf(0.0);
            let zero_share = ((target_zero - clamped) / (1.0 - clamped)).max(0.0);
            FieldSpec {
                field_id: id.to_string(),
                n,
                zero_share,
                k,
                sigma,
                mu,
                rank_mix: BTreeMap::from([
                    (AcademicRank::FullConfirmed, 0.30),
                    (AcademicRank::AssociateConfirmed, 0.30),
                    (AcademicRank::AssistantConfirmed, 0.30),
                    (AcademicRank::AssistantProbationary, 0.10),
                ]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopShareSummary {
    pub p: f64,
    pub band_violations: usize,
    pub max_abs_deviation: f64,
    pub worst_field: String,
    pub worst_share: f64,
    pub report: TopShareReport,
}

impl TopShareSummary {
    fn from_report(report: TopShareReport) -> Self {
        let worst = report
            .fields
            .iter()
            .max_by(|a, b| (a.share - report.p).abs().total_cmp(&(b.share - report.p).abs()))
            .expect("nonempty report");
        Self {
            p: report.p,
            band_violations: report.band_violations(),
            max_abs_deviation: report.max_abs_deviation(),
            worst_field: worst.field.clone(),
            worst_share: worst.share,
            report,
        }
    }
}

/// How well one scaling choice (or none) equalizes the fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindEvaluation {
    /// `None` for the unstandardized scores.
    pub factor: Option<ScalingFactorKind>,
    /// Fields left out because their denominator is zero or undefined.
    pub skipped_fields: Vec<String>,
    pub top: Vec<TopShareSummary>,
    /// Largest cross-field spread of log10 CCDF on a shared grid.
    pub ccdf_spread: Option<f64>,
    /// Pooled MAD outliers over nonzero scores.
    pub outliers: Option<usize>,
    /// Max minus min of per-field outlier incidence, percentage points.
    pub outlier_incidence_range: Option<f64>,
}

impl KindEvaluation {
    pub fn label(&self) -> &'static str {
        self.factor.map_or("none", ScalingFactorKind::label)
    }

    pub fn at(&self, p: f64) -> Option<&TopShareSummary> {
        self.top.iter().find(|t| (t.p - p).abs() < 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub p_values: Vec<f64>,
    pub unstandardized: KindEvaluation,
    /// One entry per scaling factor, in [`ScalingFactorKind::ALL`] order.
    pub kinds: Vec<KindEvaluation>,
}

impl EvaluationResult {
    pub fn kind(&self, kind: ScalingFactorKind) -> &KindEvaluation {
        self.kinds.iter().find(|k| k.factor == Some(kind)).expect("all kinds evaluated")
    }

    /// Factors ordered best first at top fraction `p`: fewest band
    /// violations, then smallest CCDF spread.
    pub fn ranked(&self, p: f64) -> Vec<&KindEvaluation> {
        let mut v: Vec<&KindEvaluation> = self.kinds.iter().collect();
        let violations = |k: &KindEvaluation| k.at(p).map_or(usize::MAX, |t| t.band_violations);
        v.sort_by(|a, b| {
            violations(a)
                .cmp(&violations(b))
                .then(a.ccdf_spread.unwrap_or(f64::INFINITY).total_cmp(&b.ccdf_spread.unwrap_or(f64::INFINITY)))
        });
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    pub p_values: Vec<f64>,
    pub band: BandMode,
    pub mad_threshold: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            p_values: DEFAULT_TOP_FRACTIONS.to_vec(),
            band: BandMode::PerField,
            mad_threshold: crate::analysis::DEFAULT_MAD_THRESHOLD,
        }
    }
}

const CCDF_GRID_POINTS: usize = 32;

/// Max over a log-spaced grid of (max - min) across fields of log10 P(X >= x).
/// The grid spans from the largest per-field 5th percentile of positive
/// scores to the smallest per-field 95th percentile, so every field has
/// mass at every grid point.
pub fn ccdf_spread(sets: &[ScoreSet]) -> Option<f64> {
    let sorted: Vec<Vec<f64>> = sets.iter().map(|s| stats::sorted(&s.scores())).collect();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for s in &sorted {
        let positive: Vec<f64> = s.iter().copied().filter(|x| *x > 0.0).collect();
        lo = lo.max(stats::quantile_sorted(&positive, 0.05)?);
        hi = hi.min(stats::quantile_sorted(s, 0.95)?);
    }
    if !(hi > 0.0) {
        return None;
    }
    let lo = lo.min(hi);
    let grid: Vec<f64> = (0..CCDF_GRID_POINTS)
        .map(|i| {
            let t = i as f64 / (CCDF_GRID_POINTS - 1) as f64;
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        })
        .collect();
    let spread = grid
        .iter()
        .map(|&x| {
            let logs = sorted.iter().map(|s| {
                let at_least = s.len() - s.partition_point(|v| *v < x);
                (at_least as f64 / s.len() as f64).log10()
            });
            let (mn, mx) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            mx - mn
        })
        .fold(0.0, f64::max);
    Some(spread)
}

fn evaluate_sets(
    factor: Option<ScalingFactorKind>,
    sets: Vec<ScoreSet>,
    skipped_fields: Vec<String>,
    config: &EvaluationConfig,
) -> Result<KindEvaluation, SynthError> {
    let ranking = pooled_ranking(&sets)?;
    let top = config
        .p_values
        .iter()
        .map(|&p| top_share(&ranking, p, config.band).map(TopShareSummary::from_report))
        .collect::<Result<Vec<_>, _>>()?;
    let mad = mad_outliers(&pooled_nonzero(&sets), config.mad_threshold).ok();
    Ok(KindEvaluation {
        factor,
        skipped_fields,
        top,
        ccdf_spread: ccdf_spread(&sets),
        outliers: mad.as_ref().map(|m| m.total_outliers),
        outlier_incidence_range: mad.as_ref().map(|m| m.incidence_range()),
    })
}

/// Standardize with every factor, pool, and measure how evenly the fields
/// populate the global top fractions, how well their CCDFs superimpose and
/// how evenly MAD outliers spread.
pub fn evaluate_scaling_factors(sets: &[ScoreSet], config: &EvaluationConfig) -> Result<EvaluationResult, SynthError> {
    if sets.len() < 2 {
        return Err(SynthError::TooFewFields(sets.len()));
    }
    let unstandardized = evaluate_sets(None, sets.to_vec(), Vec::new(), config)?;
    let kinds = ScalingFactorKind::ALL
        .iter()
        .map(|&kind| {
            let mut kept = Vec::with_capacity(sets.len());
            let mut skipped = Vec::new();
            for s in sets {
                match standardize(s, kind) {
                    Ok(std) => kept.push(std),
                    Err(ScalingError::ZeroDenominator { field, .. }) => {
                        warn!("{kind}: skipping field {field}, denominator is zero");
                        skipped.push(field);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if kept.is_empty() {
                return Err(SynthError::TooFewFields(0));
            }
            evaluate_sets(Some(kind), kept, skipped, config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvaluationResult { p_values: config.p_values.clone(), unstandardized, kinds })
}
