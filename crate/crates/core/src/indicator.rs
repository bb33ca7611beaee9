//! Fractional Scientific Strength (FSS), its stipend-normalized form FSS*,
//! gross fractional-count productivity and the within-field percentile rank.
//!
//! For a researcher with `t` years of work and publications `i`:
//!
//! ```text
//! FSS  = (1/t) * sum_i (c_i / cbar_i) * f_i
//! FSS* = FSS / stipend_coefficient(rank)
//! ```
//!
//! where `c_i` is the citation count, `cbar_i` the citation baseline of the
//! publication's (year, category) cells and `f_i` the researcher's fractional
//! contribution to the byline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::model::{AcademicRank, BylineConvention, CitationBaseline, Publication, Researcher, ScoreSet, StipendTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error("publication {publication}: position {position} outside byline of {n}")]
    PositionOutOfRange { publication: String, position: usize, n: usize },
    #[error("publication {publication}: no citation baseline for {}", fmt_cells(.cells))]
    MissingBaseline { publication: String, cells: Vec<(i32, String)> },
    #[error("publication {publication}: researcher {researcher} is not on the byline")]
    NotAnAuthor { publication: String, researcher: String },
    #[error("researcher {researcher}: years_active must be > 0, got {value}")]
    InvalidYears { researcher: String, value: f64 },
    #[error("researcher {0} not present in score list")]
    ResearcherAbsent(String),
}

fn fmt_cells(cells: &[(i32, String)]) -> String {
    cells.iter().map(|(y, c)| format!("({y}, {c})")).collect::<Vec<_>>().join(", ")
}

/// Shares used for positional (life-science) bylines with more than two
/// authors. Defaults follow Italian life-science practice and may be tuned
/// for other national contexts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionalWeights {
    /// First and last author each, when they share an institution.
    pub intramural_anchor: f64,
    /// Split equally among everyone else (intramural).
    pub intramural_rest: f64,
    /// First and last author each, when their institutions differ.
    pub extramural_anchor: f64,
    /// Second and second-to-last author each (extramural).
    pub extramural_second: f64,
    /// Split equally among the remaining inner authors (extramural).
    pub extramural_rest: f64,
}

impl Default for PositionalWeights {
    fn default() -> Self {
        Self {
            intramural_anchor: 0.40,
            intramural_rest: 0.20,
            extramural_anchor: 0.30,
            extramural_second: 0.15,
            extramural_rest: 0.10,
        }
    }
}

/// Fractional contribution of every byline slot, in position order. Always
/// sums to 1.
pub fn byline_weights(publication: &Publication, weights: &PositionalWeights) -> Vec<f64> {
    let n = publication.byline.len();
    if n == 0 {
        return Vec::new();
    }
    if publication.convention == BylineConvention::Alphabetical || n <= 2 {
        return vec![1.0 / n as f64; n];
    }

    let institution = |pos: usize| publication.author_at(pos).map(|a| a.institution_id.as_str());
    let intramural = institution(1).is_some() && institution(1) == institution(n);

    let raw: Vec<f64> = if intramural {
        let rest = weights.intramural_rest / (n - 2) as f64;
        (1..=n).map(|pos| if pos == 1 || pos == n { weights.intramural_anchor } else { rest }).collect()
    } else {
        // For n = 3 the second and second-to-last slot coincide; it is
        // assigned once. For n = 4 nobody is left for the inner share.
        let inner = (1..=n).filter(|&p| p != 1 && p != 2 && p != n - 1 && p != n).count();
        let rest = if inner > 0 { weights.extramural_rest / inner as f64 } else { 0.0 };
        (1..=n)
            .map(|pos| {
                if pos == 1 || pos == n {
                    weights.extramural_anchor
                } else if pos == 2 || pos == n - 1 {
                    weights.extramural_second
                } else {
                    rest
                }
            })
            .collect()
    };

    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn fractional_contribution_with(
    publication: &Publication,
    position: usize,
    weights: &PositionalWeights,
) -> Result<f64, IndicatorError> {
    let n = publication.byline.len();
    if position == 0 || position > n {
        return Err(IndicatorError::PositionOutOfRange { publication: publication.id.clone(), position, n });
    }
    Ok(byline_weights(publication, weights)[position - 1])
}

/// Fractional contribution of the author at a 1-based byline position, using
/// the default positional weights.
pub fn fractional_contribution(publication: &Publication, position: usize) -> Result<f64, IndicatorError> {
    fractional_contribution_with(publication, position, &PositionalWeights::default())
}

/// Citations relative to the publication's baseline, averaging the cells of
/// its subject categories. Uncited publications are 0 whatever the baseline.
pub fn normalized_citation(publication: &Publication, baselines: &CitationBaseline) -> Result<f64, IndicatorError> {
    if publication.citations == 0 {
        return Ok(0.0);
    }
    let cells: Vec<f64> =
        publication.subject_categories.iter().filter_map(|c| baselines.get(publication.year, c)).collect();
    if cells.is_empty() {
        return Err(IndicatorError::MissingBaseline {
            publication: publication.id.clone(),
            cells: publication.subject_categories.iter().map(|c| (publication.year, c.clone())).collect(),
        });
    }
    let baseline = cells.iter().sum::<f64>() / cells.len() as f64;
    Ok(publication.citations as f64 / baseline)
}

fn check_years(researcher: &Researcher) -> Result<f64, IndicatorError> {
    if researcher.years_active > 0.0 {
        Ok(researcher.years_active)
    } else {
        Err(IndicatorError::InvalidYears { researcher: researcher.id.clone(), value: researcher.years_active })
    }
}

fn contribution_of(
    researcher: &Researcher,
    publication: &Publication,
    weights: &PositionalWeights,
) -> Result<f64, IndicatorError> {
    let position = publication.position_of(&researcher.id).ok_or_else(|| IndicatorError::NotAnAuthor {
        publication: publication.id.clone(),
        researcher: researcher.id.clone(),
    })?;
    fractional_contribution_with(publication, position, weights)
}

pub fn fss_with(
    researcher: &Researcher,
    publications: &[&Publication],
    baselines: &CitationBaseline,
    weights: &PositionalWeights,
) -> Result<f64, IndicatorError> {
    let t = check_years(researcher)?;
    let mut total = 0.0;
    for p in publications {
        total += normalized_citation(p, baselines)? * contribution_of(researcher, p, weights)?;
    }
    Ok(total / t)
}

/// Average yearly field-normalized productivity of one researcher.
pub fn fss(
    researcher: &Researcher,
    publications: &[&Publication],
    baselines: &CitationBaseline,
) -> Result<f64, IndicatorError> {
    fss_with(researcher, publications, baselines, &PositionalWeights::default())
}

/// FSS per unit of labor cost.
pub fn fss_star(fss_value: f64, rank: AcademicRank, stipends: &StipendTable) -> f64 {
    fss_value / stipends.coefficient(rank)
}

/// Fractional publication count per year of work.
pub fn gross_productivity(
    researcher: &Researcher,
    publications: &[&Publication],
    weights: &PositionalWeights,
) -> Result<f64, IndicatorError> {
    let t = check_years(researcher)?;
    let mut total = 0.0;
    for p in publications {
        total += contribution_of(researcher, p, weights)?;
    }
    Ok(total / t)
}

/// `100 * (n - r) / n` with `r` the 1-based descending competition rank
/// (tied scores share the best rank).
pub fn percentile_rank(scores: &ScoreSet, researcher: &str) -> Result<f64, IndicatorError> {
    let own = scores
        .entries()
        .iter()
        .find(|e| e.researcher == researcher)
        .ok_or_else(|| IndicatorError::ResearcherAbsent(researcher.to_string()))?
        .score;
    let n = scores.len();
    let rank = 1 + scores.entries().iter().filter(|e| e.score > own).count();
    Ok(100.0 * (n - rank) as f64 / n as f64)
}

/// Per-researcher indicator values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearcherScore {
    pub researcher: String,
    pub field: String,
    pub rank: AcademicRank,
    pub years_active: f64,
    pub fss: f64,
    pub fss_star: f64,
}

/// FSS and FSS* for every researcher of a dataset, in roster order.
pub fn score_dataset(
    dataset: &Dataset,
    stipends: &StipendTable,
    weights: &PositionalWeights,
) -> Result<Vec<ResearcherScore>, IndicatorError> {
    let by_researcher = dataset.publications_by_researcher();
    dataset
        .researchers
        .par_iter()
        .map(|r| {
            let pubs = by_researcher.get(r.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let value = fss_with(r, pubs, &dataset.baselines, weights)?;
            Ok(ResearcherScore {
                researcher: r.id.clone(),
                field: r.field_id.clone(),
                rank: r.rank,
                years_active: r.years_active,
                fss: value,
                fss_star: fss_star(value, r.rank, stipends),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AuthorRef, Authorship, ScoreKind};
    use approx::assert_abs_diff_eq;

    fn publication(convention: BylineConvention, institutions: &[&str], citations: u64) -> Publication {
        Publication {
            id: "p".into(),
            year: 2005,
            subject_categories: ["SC1".to_string()].into(),
            citations,
            byline: institutions
                .iter()
                .enumerate()
                .map(|(i, inst)| Authorship {
                    author_ref: AuthorRef::Researcher(format!("a{}", i + 1)),
                    position: i + 1,
                    institution_id: inst.to_string(),
                })
                .collect(),
            convention,
        }
    }

    fn researcher(id: &str, t: f64) -> Researcher {
        Researcher {
            id: id.into(),
            field_id: "F".into(),
            uda_id: "U".into(),
            rank: AcademicRank::AssistantProbationary,
            years_active: t,
            institution_id: "u".into(),
        }
    }

    #[test]
    fn alphabetical_is_inverse_count() {
        let p = publication(BylineConvention::Alphabetical, &["a", "b", "c", "d"], 1);
        for pos in 1..=4 {
            assert_abs_diff_eq!(fractional_contribution(&p, pos).unwrap(), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn positional_intramural_five() {
        let p = publication(BylineConvention::Positional, &["u", "x", "y", "z", "u"], 1);
        assert_abs_diff_eq!(fractional_contribution(&p, 1).unwrap(), 0.40, epsilon = 1e-12);
        assert_abs_diff_eq!(fractional_contribution(&p, 5).unwrap(), 0.40, epsilon = 1e-12);
        for pos in 2..=4 {
            assert_abs_diff_eq!(fractional_contribution(&p, pos).unwrap(), 0.20 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn positional_extramural_six() {
        let p = publication(BylineConvention::Positional, &["u", "v", "w", "x", "y", "z"], 1);
        let w: Vec<f64> = (1..=6).map(|pos| fractional_contribution(&p, pos).unwrap()).collect();
        let expected = [0.30, 0.15, 0.05, 0.05, 0.15, 0.30];
        for (got, want) in w.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn positional_two_authors_fall_back() {
        let p = publication(BylineConvention::Positional, &["u", "v"], 1);
        assert_eq!(fractional_contribution(&p, 1).unwrap(), 0.5);
        assert_eq!(fractional_contribution(&p, 2).unwrap(), 0.5);
    }

    #[test]
    fn positional_small_extramural_renormalized() {
        // n = 3: raw (0.30, 0.15, 0.30) -> / 0.75
        let p = publication(BylineConvention::Positional, &["u", "v", "w"], 1);
        let w = byline_weights(&p, &PositionalWeights::default());
        assert_abs_diff_eq!(w[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.2, epsilon = 1e-12);
        // n = 4: raw (0.30, 0.15, 0.15, 0.30) -> / 0.90
        let p = publication(BylineConvention::Positional, &["u", "v", "w", "x"], 1);
        let w = byline_weights(&p, &PositionalWeights::default());
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn position_out_of_range() {
        let p = publication(BylineConvention::Alphabetical, &["u", "v"], 1);
        assert!(matches!(fractional_contribution(&p, 0), Err(IndicatorError::PositionOutOfRange { .. })));
        assert!(matches!(fractional_contribution(&p, 3), Err(IndicatorError::PositionOutOfRange { .. })));
    }

    #[test]
    fn normalized_citation_cases() {
        let mut b = CitationBaseline::new();
        b.insert(2005, "SC1", 2.0).unwrap();
        b.insert(2005, "SC2", 4.0).unwrap();
        let mut p = publication(BylineConvention::Alphabetical, &["u"], 4);
        assert_eq!(normalized_citation(&p, &b).unwrap(), 2.0);
        p.citations = 0;
        assert_eq!(normalized_citation(&p, &CitationBaseline::new()).unwrap(), 0.0);
        p.citations = 6;
        p.subject_categories.insert("SC2".into());
        assert_eq!(normalized_citation(&p, &b).unwrap(), 2.0);
    }

    #[test]
    fn missing_baseline_names_cells() {
        let p = publication(BylineConvention::Alphabetical, &["u"], 3);
        match normalized_citation(&p, &CitationBaseline::new()) {
            Err(IndicatorError::MissingBaseline { cells, .. }) => assert_eq!(cells, vec![(2005, "SC1".to_string())]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fss_worked_examples() {
        let mut b = CitationBaseline::new();
        b.insert(2005, "SC1", 2.0).unwrap();
        let r = researcher("a1", 5.0);
        assert_eq!(fss(&r, &[], &b).unwrap(), 0.0);

        let p = publication(BylineConvention::Alphabetical, &["u", "v"], 4);
        assert_abs_diff_eq!(fss(&r, &[&p], &b).unwrap(), 0.2, epsilon = 1e-12);

        // t = 1: (c/cbar = 1, f = 1) and (c/cbar = 3, f = 1/3)
        let r = researcher("a1", 1.0);
        let solo = publication(BylineConvention::Alphabetical, &["u"], 2);
        let trio = publication(BylineConvention::Alphabetical, &["u", "v", "w"], 6);
        assert_abs_diff_eq!(fss(&r, &[&solo, &trio], &b).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fss_requires_authorship_and_positive_years() {
        let b = CitationBaseline::new();
        let p = publication(BylineConvention::Alphabetical, &["u"], 0);
        assert!(matches!(fss(&researcher("zz", 1.0), &[&p], &b), Err(IndicatorError::NotAnAuthor { .. })));
        assert!(matches!(fss(&researcher("a1", 0.0), &[], &b), Err(IndicatorError::InvalidYears { .. })));
    }

    #[test]
    fn fss_star_cases() {
        let t = StipendTable::default();
        assert_eq!(fss_star(0.2, AcademicRank::AssistantProbationary, &t), 0.2);
        assert_abs_diff_eq!(fss_star(0.2783, AcademicRank::FullConfirmed, &t), 0.1, epsilon = 1e-12);
        assert_eq!(fss_star(0.0, AcademicRank::ResearchAssistant, &t), 0.0);
    }

    #[test]
    fn gross_productivity_cases() {
        let w = PositionalWeights::default();
        assert_eq!(gross_productivity(&researcher("a1", 3.0), &[], &w).unwrap(), 0.0);
        let p1 = publication(BylineConvention::Alphabetical, &["u", "v"], 0);
        let p2 = publication(BylineConvention::Alphabetical, &["u", "v"], 9);
        assert_abs_diff_eq!(gross_productivity(&researcher("a1", 2.0), &[&p1, &p2], &w).unwrap(), 0.5);
        let solo = publication(BylineConvention::Positional, &["u"], 0);
        assert_eq!(gross_productivity(&researcher("a1", 1.0), &[&solo], &w).unwrap(), 1.0);
    }

    fn descending_field(n: usize) -> ScoreSet {
        let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        ScoreSet::from_scores("F", &scores, ScoreKind::FssStar).unwrap()
    }

    #[test]
    fn percentile_rank_foil() {
        assert_eq!(percentile_rank(&descending_field(10), "F#2").unwrap(), 70.0);
        assert_eq!(percentile_rank(&descending_field(100), "F#2").unwrap(), 97.0);
        assert_eq!(percentile_rank(&descending_field(1), "F#0").unwrap(), 0.0);
        assert!(percentile_rank(&descending_field(3), "nobody").is_err());
    }

    #[test]
    fn percentile_rank_ties_share_best_rank() {
        let set = ScoreSet::from_scores("F", &[5.0, 3.0, 3.0, 1.0], ScoreKind::FssStar).unwrap();
        assert_eq!(percentile_rank(&set, "F#1").unwrap(), 50.0);
        assert_eq!(percentile_rank(&set, "F#2").unwrap(), 50.0);
        assert_eq!(percentile_rank(&set, "F#3").unwrap(), 0.0);
    }
}
