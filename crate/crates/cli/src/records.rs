//! The scores table shared by `score`, `standardize`, `analyze` and
//! `percentile`, plus number formatting for emitted files.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use crossfield_core::{AcademicRank, ScoreEntry, ScoreKind, ScoreSet};

pub const SCORES_HEADER: [&str; 6] = ["researcher", "field", "rank", "t", "fss", "fss_star"];
pub const STD_COLUMN: &str = "fss_star_std";

/// One row of `scores.csv` or `standardized.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub researcher: String,
    pub field: String,
    pub rank: AcademicRank,
    pub t: f64,
    pub fss: f64,
    pub fss_star: f64,
    /// Present only in standardized files; `None` for skipped fields.
    pub fss_star_std: Option<f64>,
}

/// Which score column to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreColumn {
    FssStar,
    Standardized,
}

/// Shortest representation that parses back to the same value.
pub fn full(x: f64) -> String {
    format!("{x}")
}

/// Fixed three decimals, as in the report tables.
pub fn table(x: f64) -> String {
    format!("{x:.3}")
}

fn parse_number(raw: &str, path: &Path, line: u64, column: &str) -> Result<f64> {
    let v: f64 =
        raw.parse().ok().filter(|v: &f64| v.is_finite()).with_context(|| {
            format!("{}: line {line}, column `{column}`: not a finite number: `{raw}`", path.display())
        })?;
    Ok(v)
}

/// Read a scores table. The second value tells whether the file carries the
/// standardized column.
pub fn read_scores(path: &Path) -> Result<(Vec<ScoreRow>, bool)> {
    let file = File::open(path).with_context(|| format!("{}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .with_context(|| format!("{}: unreadable header", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let has_std = if header == SCORES_HEADER {
        false
    } else if header.len() == 7 && header[..6] == SCORES_HEADER && header[6] == STD_COLUMN {
        true
    } else {
        bail!(
            "{}: unexpected header {:?}, expected {:?} with optional `{STD_COLUMN}`",
            path.display(),
            header,
            SCORES_HEADER
        );
    };
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.with_context(|| format!("{}", path.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(i).unwrap_or("");
        let researcher = get(0).to_string();
        if researcher.is_empty() {
            bail!("{}: line {line}, column `researcher`: empty id", path.display());
        }
        let field = get(1).to_string();
        if field.is_empty() {
            bail!("{}: line {line}, column `field`: empty field id", path.display());
        }
        let rank: AcademicRank = get(2).parse().map_err(|e: crossfield_core::model::UnknownRank| {
            anyhow::anyhow!("{}: line {line}, column `rank`: {e}", path.display())
        })?;
        let fss_star_std =
            if has_std && !get(6).is_empty() { Some(parse_number(get(6), path, line, STD_COLUMN)?) } else { None };
        rows.push(ScoreRow {
            researcher,
            field,
            rank,
            t: parse_number(get(3), path, line, "t")?,
            fss: parse_number(get(4), path, line, "fss")?,
            fss_star: parse_number(get(5), path, line, "fss_star")?,
            fss_star_std,
        });
    }
    Ok((rows, has_std))
}

pub fn write_scores(path: &Path, rows: &[ScoreRow], with_std: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("{}", path.display()))?;
    let mut header = SCORES_HEADER.to_vec();
    if with_std {
        header.push(STD_COLUMN);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.researcher.clone(),
            r.field.clone(),
            r.rank.label().to_string(),
            full(r.t),
            full(r.fss),
            full(r.fss_star),
        ];
        if with_std {
            rec.push(r.fss_star_std.map(full).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Group rows into per-field score sets, ordered by field id. Rows without a
/// value in the chosen column are left out.
pub fn score_sets(rows: &[ScoreRow], column: ScoreColumn, kind: ScoreKind) -> Result<Vec<ScoreSet>> {
    let mut by_field: BTreeMap<&str, Vec<ScoreEntry>> = BTreeMap::new();
    for r in rows {
        let score = match column {
            ScoreColumn::FssStar => Some(r.fss_star),
            ScoreColumn::Standardized => r.fss_star_std,
        };
        if let Some(score) = score {
            by_field.entry(r.field.as_str()).or_default().push(ScoreEntry { researcher: r.researcher.clone(), score });
        }
    }
    by_field.into_iter().map(|(field, entries)| ScoreSet::new(field, entries, kind).map_err(Into::into)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trips() {
        for x in [0.2, 1.0 / 3.0, 2.783, 1e-12, 123456.789, 0.0] {
            assert_eq!(full(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_uses_three_decimals() {
        assert_eq!(table(0.05), "0.050");
        assert_eq!(table(2.0 / 3.0), "0.667");
    }

    #[test]
    fn rejects_unknown_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "researcher,field,rank,t,fss\n").unwrap();
        assert!(read_scores(&p).is_err());
        std::fs::write(&p, "researcher,field,rank,t,fss,fss_star,bogus\n").unwrap();
        assert!(read_scores(&p).is_err());
    }

    #[test]
    fn diagnostics_name_file_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "researcher,field,rank,t,fss,fss_star\nr1,F,full_confirmed,5,x,0.1\n").unwrap();
        let msg = read_scores(&p).unwrap_err().to_string();
        assert!(msg.contains("s.csv") && msg.contains("line 2") && msg.contains("`fss`"), "{msg}");
    }
}
