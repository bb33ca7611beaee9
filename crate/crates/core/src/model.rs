//! Domain types shared across the pipeline and the built-in stipend table.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scaling::ScalingFactorKind;

/// Yearly average stipend of the probationary assistant professor, the
/// normalization anchor of the stipend coefficients (euro, 2004-2008).
pub const ANCHOR_STIPEND_EUR: f64 = 44_899.0;

/// Academic rank of an Italian university professor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcademicRank {
    FullConfirmed,
    FullProbationary,
    AssociateConfirmed,
    AssociateProbationary,
    AssistantConfirmed,
    AssistantProbationary,
    /// Obsolete rank, still present in the 2004-2008 rosters.
    ResearchAssistant,
}

impl AcademicRank {
    pub const ALL: [AcademicRank; 7] = [
        AcademicRank::FullConfirmed,
        AcademicRank::FullProbationary,
        AcademicRank::AssociateConfirmed,
        AcademicRank::AssociateProbationary,
        AcademicRank::AssistantConfirmed,
        AcademicRank::AssistantProbationary,
        AcademicRank::ResearchAssistant,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AcademicRank::FullConfirmed => "full_confirmed",
            AcademicRank::FullProbationary => "full_probationary",
            AcademicRank::AssociateConfirmed => "associate_confirmed",
            AcademicRank::AssociateProbationary => "associate_probationary",
            AcademicRank::AssistantConfirmed => "assistant_confirmed",
            AcademicRank::AssistantProbationary => "assistant_probationary",
            AcademicRank::ResearchAssistant => "research_assistant",
        }
    }

    /// Yearly average stipend for the rank in euro.
    pub fn yearly_stipend(self) -> f64 {
        match self {
            AcademicRank::FullConfirmed => 124_939.0,
            AcademicRank::FullProbationary => 94_442.0,
            AcademicRank::AssociateConfirmed => 90_622.0,
            AcademicRank::AssociateProbationary => 68_469.0,
            AcademicRank::AssistantConfirmed => 68_844.0,
            AcademicRank::AssistantProbationary => ANCHOR_STIPEND_EUR,
            AcademicRank::ResearchAssistant => 81_721.0,
        }
    }

    /// Ratio of the rank's stipend to that of a probationary assistant
    /// professor, as published (three decimals).
    pub fn stipend_coefficient(self) -> f64 {
        match self {
            AcademicRank::FullConfirmed => 2.783,
            AcademicRank::FullProbationary => 2.103,
            AcademicRank::AssociateConfirmed => 2.018,
            AcademicRank::AssociateProbationary => 1.525,
            AcademicRank::AssistantConfirmed => 1.533,
            AcademicRank::AssistantProbationary => 1.0,
            AcademicRank::ResearchAssistant => 1.820,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AcademicRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown academic rank `{0}`")]
pub struct UnknownRank(pub String);

impl FromStr for AcademicRank {
    type Err = UnknownRank;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AcademicRank::ALL.into_iter().find(|r| r.label() == s).ok_or_else(|| UnknownRank(s.to_string()))
    }
}

/// Stipend coefficient per rank. Defaults to the compiled-in table; entries
/// may be overridden where local salary data differ.
#[derive(Debug, Clone, PartialEq)]
pub struct StipendTable {
    coefficients: [f64; 7],
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("stipend coefficient for {rank} must be finite and > 0, got {value}")]
pub struct InvalidCoefficient {
    pub rank: AcademicRank,
    pub value: f64,
}

impl Default for StipendTable {
    fn default() -> Self {
        let mut coefficients = [0.0; 7];
        for rank in AcademicRank::ALL {
            coefficients[rank.index()] = rank.stipend_coefficient();
        }
        Self { coefficients }
    }
}

impl StipendTable {
    pub fn coefficient(&self, rank: AcademicRank) -> f64 {
        self.coefficients[rank.index()]
    }

    pub fn set(&mut self, rank: AcademicRank, value: f64) -> Result<(), InvalidCoefficient> {
        if !(value.is_finite() && value > 0.0) {
            return Err(InvalidCoefficient { rank, value });
        }
        self.coefficients[rank.index()] = value;
        Ok(())
    }
}

/// Built-in stipend coefficient for a rank.
pub fn stipend_coefficient(rank: AcademicRank) -> f64 {
    rank.stipend_coefficient()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Researcher {
    pub id: String,
    /// SDS code, e.g. `MAT/05`.
    pub field_id: String,
    /// UDA code.
    pub uda_id: String,
    pub rank: AcademicRank,
    /// Years of work inside the observation window.
    pub years_active: f64,
    pub institution_id: String,
}

/// Who occupies a byline slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuthorRef {
    Researcher(String),
    /// Co-author outside the evaluated roster; the label is informational.
    External(String),
}

impl AuthorRef {
    pub fn researcher_id(&self) -> Option<&str> {
        match self {
            AuthorRef::Researcher(id) => Some(id),
            AuthorRef::External(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Authorship {
    pub author_ref: AuthorRef,
    /// 1-based byline index.
    pub position: usize,
    pub institution_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BylineConvention {
    Alphabetical,
    /// Life-science practice: position in the byline signals contribution.
    Positional,
}

impl BylineConvention {
    pub fn label(self) -> &'static str {
        match self {
            BylineConvention::Alphabetical => "alphabetical",
            BylineConvention::Positional => "positional",
        }
    }
}

impl FromStr for BylineConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alphabetical" => Ok(BylineConvention::Alphabetical),
            "positional" => Ok(BylineConvention::Positional),
            other => Err(format!("unknown byline convention `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub year: i32,
    pub subject_categories: BTreeSet<String>,
    /// Citations accumulated at the census date.
    pub citations: u64,
    pub byline: Vec<Authorship>,
    pub convention: BylineConvention,
}

impl Publication {
    /// Byline entry at a 1-based position.
    pub fn author_at(&self, position: usize) -> Option<&Authorship> {
        self.byline.iter().find(|a| a.position == position)
    }

    /// 1-based byline position of a roster researcher, if they co-authored.
    pub fn position_of(&self, researcher_id: &str) -> Option<usize> {
        self.byline.iter().find(|a| a.author_ref.researcher_id() == Some(researcher_id)).map(|a| a.position)
    }
}

/// Mean citations of cited publications per (year, subject category).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationBaseline {
    cells: BTreeMap<(i32, String), f64>,
}

impl CitationBaseline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a cell. Means must be finite and positive.
    pub fn insert(&mut self, year: i32, category: impl Into<String>, mean: f64) -> Result<(), String> {
        let category = category.into();
        if !(mean.is_finite() && mean > 0.0) {
            return Err(format!("baseline mean for ({year}, {category}) must be > 0, got {mean}"));
        }
        self.cells.insert((year, category), mean);
        Ok(())
    }

    pub fn get(&self, year: i32, category: &str) -> Option<f64> {
        self.cells.get(&(year, category.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &str, f64)> {
        self.cells.iter().map(|((y, c), m)| (*y, c.as_str(), *m))
    }
}

/// What a [`ScoreSet`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    RawFss,
    FssStar,
    Standardized(ScalingFactorKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub researcher: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreSetError {
    #[error("field {field}: score for {researcher} must be finite and >= 0, got {score}")]
    InvalidScore { field: String, researcher: String, score: f64 },
    #[error("field {field}: duplicate researcher {researcher}")]
    DuplicateResearcher { field: String, researcher: String },
}

/// Per-field collection of productivity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    field_id: String,
    entries: Vec<ScoreEntry>,
    kind: ScoreKind,
}

impl ScoreSet {
    pub fn new(field_id: impl Into<String>, entries: Vec<ScoreEntry>, kind: ScoreKind) -> Result<Self, ScoreSetError> {
        let field_id = field_id.into();
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !(e.score.is_finite() && e.score >= 0.0) {
                return Err(ScoreSetError::InvalidScore {
                    field: field_id,
                    researcher: e.researcher.clone(),
                    score: e.score,
                });
            }
            if !seen.insert(e.researcher.as_str()) {
                return Err(ScoreSetError::DuplicateResearcher { field: field_id, researcher: e.researcher.clone() });
            }
        }
        Ok(Self { field_id, entries, kind })
    }

    /// Convenience constructor with generated researcher ids `<field>#<i>`.
    pub fn from_scores(field_id: impl Into<String>, scores: &[f64], kind: ScoreKind) -> Result<Self, ScoreSetError> {
        let field_id = field_id.into();
        let entries = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoreEntry { researcher: format!("{field_id}#{i}"), score })
            .collect();
        Self::new(field_id, entries, kind)
    }

    pub fn field_id(&self) -> &str {
        &self.field_id
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn zero_count(&self) -> usize {
        self.entries.iter().filter(|e| e.score == 0.0).count()
    }

    /// Strictly positive scores only.
    pub fn nonzero_scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).filter(|&s| s > 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    DuplicateResearcherId { id: String },
    DuplicatePublicationId { id: String },
    InvalidYearsActive { researcher: String, value: f64 },
    EmptyField { researcher: String },
    EmptyByline { publication: String },
    EmptyCategories { publication: String },
    DanglingAuthorRef { publication: String, author_ref: String },
    BadBylinePositions { publication: String },
    RepeatedAuthor { publication: String, author_ref: String },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DuplicateResearcherId { id } => write!(f, "duplicate researcher id {id}"),
            ValidationIssue::DuplicatePublicationId { id } => write!(f, "duplicate publication id {id}"),
            ValidationIssue::InvalidYearsActive { researcher, value } => {
                write!(f, "researcher {researcher}: years_active must be > 0, got {value}")
            }
            ValidationIssue::EmptyField { researcher } => write!(f, "researcher {researcher}: empty field id"),
            ValidationIssue::EmptyByline { publication } => write!(f, "publication {publication}: empty byline"),
            ValidationIssue::EmptyCategories { publication } => {
                write!(f, "publication {publication}: no subject categories")
            }
            ValidationIssue::DanglingAuthorRef { publication, author_ref } => {
                write!(f, "publication {publication}: unknown researcher {author_ref}")
            }
            ValidationIssue::BadBylinePositions { publication } => {
                write!(f, "publication {publication}: byline positions are not a permutation of 1..n")
            }
            ValidationIssue::RepeatedAuthor { publication, author_ref } => {
                write!(f, "publication {publication}: researcher {author_ref} listed more than once")
            }
        }
    }
}

/// Outcome of [`validate_roster`]; empty iff the dataset is consistent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Check the referential and structural consistency of a roster and its
/// publications. Reports every problem; never fails.
pub fn validate_roster(researchers: &[Researcher], publications: &[Publication]) -> ValidationReport {
    let mut issues = Vec::new();

    let mut ids: HashMap<&str, usize> = HashMap::new();
    for r in researchers {
        *ids.entry(r.id.as_str()).or_default() += 1;
        if !(r.years_active > 0.0) {
            issues.push(ValidationIssue::InvalidYearsActive { researcher: r.id.clone(), value: r.years_active });
        }
        if r.field_id.trim().is_empty() {
            issues.push(ValidationIssue::EmptyField { researcher: r.id.clone() });
        }
    }
    let mut dup_researchers: Vec<&str> = ids.iter().filter(|(_, &n)| n > 1).map(|(id, _)| *id).collect();
    dup_researchers.sort_unstable();
    issues.extend(dup_researchers.into_iter().map(|id| ValidationIssue::DuplicateResearcherId { id: id.to_string() }));

    let mut pub_ids: HashSet<&str> = HashSet::new();
    for p in publications {
        if !pub_ids.insert(p.id.as_str()) {
            issues.push(ValidationIssue::DuplicatePublicationId { id: p.id.clone() });
        }
        if p.subject_categories.is_empty() {
            issues.push(ValidationIssue::EmptyCategories { publication: p.id.clone() });
        }
        if p.byline.is_empty() {
            issues.push(ValidationIssue::EmptyByline { publication: p.id.clone() });
            continue;
        }
        let mut positions: Vec<usize> = p.byline.iter().map(|a| a.position).collect();
        positions.sort_unstable();
        if positions.iter().enumerate().any(|(i, &pos)| pos != i + 1) {
            issues.push(ValidationIssue::BadBylinePositions { publication: p.id.clone() });
        }
        let mut seen = HashSet::new();
        for a in &p.byline {
            if let Some(rid) = a.author_ref.researcher_id() {
                if !ids.contains_key(rid) {
                    issues.push(ValidationIssue::DanglingAuthorRef {
                        publication: p.id.clone(),
                        author_ref: rid.to_string(),
                    });
                }
                if !seen.insert(rid) {
                    issues.push(ValidationIssue::RepeatedAuthor {
                        publication: p.id.clone(),
                        author_ref: rid.to_string(),
                    });
                }
            }
        }
    }

    ValidationReport { issues }
}
