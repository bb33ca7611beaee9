//! Roster and publication file parsing, citation baselines and the
//! field-eligibility filter.
//!
//! File schemas (UTF-8, comma-delimited, header row required):
//!
//! - researchers: `id,field,uda,rank,years_active,institution`
//! - publications: `id,year,categories,citations,convention,byline` where
//!   `categories` is `;`-joined and `byline` is `;`-joined
//!   `author_ref@institution` tokens in byline order. An author_ref of `ext`
//!   or `ext:<label>` marks a co-author outside the roster.
//! - baselines: `year,category,mean_cited`
//! - stipend overrides: `rank,coefficient`

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    validate_roster, AcademicRank, AuthorRef, Authorship, BylineConvention, CitationBaseline, Publication, Researcher,
    StipendTable, ValidationReport,
};

pub const RESEARCHERS_HEADER: [&str; 6] = ["id", "field", "uda", "rank", "years_active", "institution"];
pub const PUBLICATIONS_HEADER: [&str; 6] = ["id", "year", "categories", "citations", "convention", "byline"];
pub const BASELINES_HEADER: [&str; 3] = ["year", "category", "mean_cited"];

const LIST_DELIMITER: char = ';';
const EXTERNAL_MARKER: &str = "ext";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}, column `{column}`: {message}")]
    Parse { line: u64, column: String, message: String },
    #[error("line {line}: duplicate {kind} id `{id}`")]
    DuplicateKey { line: u64, kind: &'static str, id: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: Vec<String>, expected: Vec<String> },
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<IngestError>,
    },
    #[error("inconsistent dataset:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub fn in_file(self, path: &Path) -> Self {
        IngestError::InFile { path: path.display().to_string(), source: Box::new(self) }
    }
}

fn parse_err(line: u64, column: &str, message: impl Into<String>) -> IngestError {
    IngestError::Parse { line, column: column.to_string(), message: message.into() }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), IngestError> {
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != expected {
        return Err(IngestError::Header { found, expected: expected.iter().map(|s| s.to_string()).collect() });
    }
    Ok(())
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

#[derive(Deserialize)]
struct ResearcherRow {
    id: String,
    field: String,
    uda: String,
    rank: String,
    years_active: String,
    institution: String,
}

pub fn load_researchers<R: Read>(source: R) -> Result<Vec<Researcher>, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &RESEARCHERS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let row: ResearcherRow = record.deserialize(None)?;
        if row.id.is_empty() {
            return Err(parse_err(line, "id", "empty researcher id"));
        }
        if row.field.is_empty() {
            return Err(parse_err(line, "field", "empty field id"));
        }
        let rank: AcademicRank =
            row.rank.parse().map_err(|e: crate::model::UnknownRank| parse_err(line, "rank", e.to_string()))?;
        let years_active: f64 = row
            .years_active
            .parse()
            .map_err(|_| parse_err(line, "years_active", format!("not a number: `{}`", row.years_active)))?;
        if !years_active.is_finite() {
            return Err(parse_err(line, "years_active", "must be finite"));
        }
        if !seen.insert(row.id.clone()) {
            return Err(IngestError::DuplicateKey { line, kind: "researcher", id: row.id });
        }
        out.push(Researcher {
            id: row.id,
            field_id: row.field,
            uda_id: row.uda,
            rank,
            years_active,
            institution_id: row.institution,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct PublicationRow {
    id: String,
    year: String,
    categories: String,
    citations: String,
    convention: String,
    byline: String,
}

fn parse_byline(raw: &str, line: u64) -> Result<Vec<Authorship>, IngestError> {
    let tokens: Vec<&str> = raw.split(LIST_DELIMITER).map(str::trim).filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Err(parse_err(line, "byline", "empty byline"));
    }
    tokens
        .into_iter()
        .enumerate()
        .map(|(i, token)| {
            let (author, institution) = token
                .rsplit_once('@')
                .ok_or_else(|| parse_err(line, "byline", format!("token `{token}` lacks `@institution`")))?;
            let (author, institution) = (author.trim(), institution.trim());
            if author.is_empty() || institution.is_empty() {
                return Err(parse_err(line, "byline", format!("malformed token `{token}`")));
            }
            let author_ref = if author == EXTERNAL_MARKER {
                AuthorRef::External(String::new())
            } else if let Some(label) = author.strip_prefix("ext:") {
                AuthorRef::External(label.to_string())
            } else {
                AuthorRef::Researcher(author.to_string())
            };
            Ok(Authorship { author_ref, position: i + 1, institution_id: institution.to_string() })
        })
        .collect()
}

pub fn load_publications<R: Read>(source: R) -> Result<Vec<Publication>, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &PUBLICATIONS_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let row: PublicationRow = record.deserialize(None)?;
        if row.id.is_empty() {
            return Err(parse_err(line, "id", "empty publication id"));
        }
        let year: i32 =
            row.year.parse().map_err(|_| parse_err(line, "year", format!("not an integer: `{}`", row.year)))?;
        let citations: i64 = row
            .citations
            .parse()
            .map_err(|_| parse_err(line, "citations", format!("not an integer: `{}`", row.citations)))?;
        if citations < 0 {
            return Err(parse_err(line, "citations", format!("negative citation count {citations}")));
        }
        let subject_categories: BTreeSet<String> =
            row.categories.split(LIST_DELIMITER).map(str::trim).filter(|c| !c.is_empty()).map(str::to_string).collect();
        if subject_categories.is_empty() {
            return Err(parse_err(line, "categories", "no subject categories"));
        }
        let convention: BylineConvention =
            row.convention.parse().map_err(|e: String| parse_err(line, "convention", e))?;
        let byline = parse_byline(&row.byline, line)?;
        if !seen.insert(row.id.clone()) {
            return Err(IngestError::DuplicateKey { line, kind: "publication", id: row.id });
        }
        out.push(Publication { id: row.id, year, subject_categories, citations: citations as u64, byline, convention });
    }
    Ok(out)
}

pub fn load_baselines<R: Read>(source: R) -> Result<CitationBaseline, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &BASELINES_HEADER)?;
    let mut baselines = CitationBaseline::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let year: i32 =
            record[0].parse().map_err(|_| parse_err(line, "year", format!("not an integer: `{}`", &record[0])))?;
        let mean: f64 =
            record[2].parse().map_err(|_| parse_err(line, "mean_cited", format!("not a number: `{}`", &record[2])))?;
        if baselines.get(year, &record[1]).is_some() {
            return Err(IngestError::DuplicateKey {
                line,
                kind: "baseline cell",
                id: format!("{year}/{}", &record[1]),
            });
        }
        baselines.insert(year, &record[1], mean).map_err(|m| parse_err(line, "mean_cited", m))?;
    }
    Ok(baselines)
}

pub fn write_baselines<W: Write>(sink: W, baselines: &CitationBaseline) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(BASELINES_HEADER)?;
    for (year, category, mean) in baselines.iter() {
        wtr.write_record([year.to_string(), category.to_string(), mean.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read `rank,coefficient` overrides on top of the built-in stipend table.
pub fn load_stipend_table<R: Read>(source: R) -> Result<StipendTable, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &["rank", "coefficient"])?;
    let mut table = StipendTable::default();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let rank: AcademicRank =
            record[0].parse().map_err(|e: crate::model::UnknownRank| parse_err(line, "rank", e.to_string()))?;
        let value: f64 =
            record[1].parse().map_err(|_| parse_err(line, "coefficient", format!("not a number: `{}`", &record[1])))?;
        table.set(rank, value).map_err(|e| parse_err(line, "coefficient", e.to_string()))?;
    }
    Ok(table)
}

/// Mean citations over cited publications (citations >= 1), per
/// (year, subject category). Multi-category publications count in every
/// listed category; cells without a cited publication are absent.
pub fn compute_baselines(publications: &[Publication]) -> CitationBaseline {
    let mut acc: BTreeMap<(i32, &str), (u64, u64)> = BTreeMap::new();
    for p in publications.iter().filter(|p| p.citations >= 1) {
        for cat in &p.subject_categories {
            let cell = acc.entry((p.year, cat.as_str())).or_default();
            cell.0 += p.citations;
            cell.1 += 1;
        }
    }
    let mut baselines = CitationBaseline::new();
    for ((year, cat), (sum, count)) in acc {
        baselines.insert(year, cat, sum as f64 / count as f64).expect("mean over integers >= 1 is positive");
    }
    baselines
}

/// A validated roster with its publications and citation baselines.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub researchers: Vec<Researcher>,
    pub publications: Vec<Publication>,
    pub baselines: CitationBaseline,
    /// `sha256:<hex> <source>` per input file.
    pub provenance: Vec<String>,
}

impl Dataset {
    /// Validate and assemble. Baselines are computed from the corpus when not
    /// supplied.
    pub fn new(
        researchers: Vec<Researcher>,
        publications: Vec<Publication>,
        baselines: Option<CitationBaseline>,
        provenance: Vec<String>,
    ) -> Result<Self, IngestError> {
        let report = validate_roster(&researchers, &publications);
        if !report.is_empty() {
            return Err(IngestError::Invalid(report));
        }
        let baselines = baselines.unwrap_or_else(|| compute_baselines(&publications));
        Ok(Self { researchers, publications, baselines, provenance })
    }

    pub fn load(researchers: &Path, publications: &Path, baselines: Option<&Path>) -> Result<Self, IngestError> {
        let mut provenance = Vec::new();
        let mut read = |path: &Path| -> Result<Vec<u8>, IngestError> {
            let bytes = fs::read(path).map_err(|e| IngestError::from(e).in_file(path))?;
            provenance.push(format!("sha256:{} {}", hex::encode(Sha256::digest(&bytes)), path.display()));
            Ok(bytes)
        };
        let rs = load_researchers(read(researchers)?.as_slice()).map_err(|e| e.in_file(researchers))?;
        let ps = load_publications(read(publications)?.as_slice()).map_err(|e| e.in_file(publications))?;
        let bs = match baselines {
            Some(path) => Some(load_baselines(read(path)?.as_slice()).map_err(|e| e.in_file(path))?),
            None => None,
        };
        Self::new(rs, ps, bs, provenance)
    }

    /// Publications per researcher id, in input order.
    pub fn publications_by_researcher(&self) -> HashMap<&str, Vec<&Publication>> {
        let mut map: HashMap<&str, Vec<&Publication>> = HashMap::new();
        for p in &self.publications {
            for a in &p.byline {
                if let Some(id) = a.author_ref.researcher_id() {
                    map.entry(id).or_default().push(p);
                }
            }
        }
        map
    }
}

/// Fields where at least `min_cited_share` of the members have at least one
/// publication with at least one citation.
pub fn filter_eligible_fields(dataset: &Dataset, min_cited_share: f64) -> BTreeSet<String> {
    let cited_authors: HashSet<&str> = dataset
        .publications
        .iter()
        .filter(|p| p.citations >= 1)
        .flat_map(|p| p.byline.iter().filter_map(|a| a.author_ref.researcher_id()))
        .collect();
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in &dataset.researchers {
        let t = tally.entry(r.field_id.as_str()).or_default();
        t.0 += 1;
        if cited_authors.contains(r.id.as_str()) {
            t.1 += 1;
        }
    }
    tally
        .into_iter()
        .filter(|(_, (members, cited))| *members > 0 && *cited as f64 / *members as f64 >= min_cited_share)
        .map(|(field, _)| field.to_string())
        .collect()
}
