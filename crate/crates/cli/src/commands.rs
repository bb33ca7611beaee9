use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crossfield_core::analysis::{
    ccdf_series, descriptive_stats, fit_gpd, ks_critical_value_5pct, ks_test, mad_outliers, pooled_nonzero,
    shape_at_upper_bound,
};
use crossfield_core::indicator::{percentile_rank, score_dataset, PositionalWeights};
use crossfield_core::ingest::{filter_eligible_fields, write_baselines, Dataset};
use crossfield_core::scaling::{pooled_ranking, standardize, top_share, ScalingError};
use crossfield_core::synth::{
    benchmark_specs, evaluate_scaling_factors, generate_population, EvaluationConfig, EvaluationResult, KindEvaluation,
    SpecFile, RNG_ALGORITHM,
};
use crossfield_core::{ScalingFactorKind, ScoreKind, ScoreSet};
use log::{info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::records::{full, read_scores, score_sets, table, write_scores, ScoreColumn, ScoreRow};

/// A condition that `--strict` turns into a failure. Mapped to exit status 3.
#[derive(Debug, Error)]
#[error("strict mode: {0}")]
pub struct StrictViolation(pub String);

/// Years active assigned to every synthetic researcher.
pub const SYNTHETIC_YEARS: f64 = 5.0;

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("{}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("{}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// Field id made safe for use as a file name.
pub fn field_file_stem(field: &str) -> String {
    field.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

#[derive(Debug, Clone, Default)]
pub struct ScoreInputs {
    pub researchers: PathBuf,
    pub publications: PathBuf,
    pub baselines: Option<PathBuf>,
    /// Fields where fewer members than this share have a cited publication
    /// are left out.
    pub min_cited_share: f64,
}

#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    pub rows: Vec<ScoreRow>,
    pub excluded_fields: Vec<String>,
    pub baselines_written: bool,
}

/// FSS and FSS* per researcher, written to `scores.csv`.
pub fn cmd_score(cfg: &RunConfig, inputs: &ScoreInputs) -> Result<ScoreOutcome> {
    let stipends = cfg.stipends()?;
    let dataset = Dataset::load(&inputs.researchers, &inputs.publications, inputs.baselines.as_deref())?;
    for line in &dataset.provenance {
        info!("input {line}");
    }
    let eligible = filter_eligible_fields(&dataset, inputs.min_cited_share);
    let all_fields: BTreeSet<&str> = dataset.researchers.iter().map(|r| r.field_id.as_str()).collect();
    let excluded_fields: Vec<String> =
        all_fields.into_iter().filter(|f| !eligible.contains(*f)).map(str::to_string).collect();
    for f in &excluded_fields {
        warn!("field {f}: below the cited-member share {}, excluded", inputs.min_cited_share);
    }
    let scores = score_dataset(&dataset, &stipends, &PositionalWeights::default())?;
    let rows: Vec<ScoreRow> = scores
        .into_iter()
        .filter(|s| eligible.contains(&s.field))
        .map(|s| ScoreRow {
            researcher: s.researcher,
            field: s.field,
            rank: s.rank,
            t: s.years_active,
            fss: s.fss,
            fss_star: s.fss_star,
            fss_star_std: None,
        })
        .collect();

    create_out_dir(&cfg.out)?;
    write_scores(&cfg.out.join("scores.csv"), &rows, false)?;
    let baselines_written = inputs.baselines.is_none();
    if baselines_written {
        let path = cfg.out.join("baselines.csv");
        let file = File::create(&path).with_context(|| format!("{}", path.display()))?;
        write_baselines(BufWriter::new(file), &dataset.baselines)?;
    }
    Ok(ScoreOutcome { rows, excluded_fields, baselines_written })
}

#[derive(Debug, Clone)]
pub struct StandardizeOutcome {
    pub rows: Vec<ScoreRow>,
    pub skipped_fields: Vec<String>,
}

/// Standardized score per (field, researcher).
type StandardizedValues = HashMap<(String, String), f64>;

/// Standardized values for every set, plus the fields whose denominator is
/// zero.
fn standardize_all(sets: &[ScoreSet], kind: ScalingFactorKind) -> Result<(StandardizedValues, Vec<String>)> {
    let mut values = HashMap::new();
    let mut skipped = Vec::new();
    for set in sets {
        match standardize(set, kind) {
            Ok(std) => {
                for e in std.entries() {
                    values.insert((std.field_id().to_string(), e.researcher.clone()), e.score);
                }
            }
            Err(ScalingError::ZeroDenominator { field, .. }) => skipped.push(field),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((values, skipped))
}

fn with_standardized(rows: &[ScoreRow], values: &StandardizedValues) -> Vec<ScoreRow> {
    rows.iter()
        .map(|r| ScoreRow { fss_star_std: values.get(&(r.field.clone(), r.researcher.clone())).copied(), ..r.clone() })
        .collect()
}

/// Adds `fss_star_std` to a scores table, written to `standardized.csv`.
pub fn cmd_standardize(cfg: &RunConfig, input: &Path) -> Result<StandardizeOutcome> {
    let (rows, _) = read_scores(input)?;
    let sets =
        score_sets(&rows, ScoreColumn::FssStar, ScoreKind::FssStar).with_context(|| format!("{}", input.display()))?;
    let (values, skipped_fields) = standardize_all(&sets, cfg.factor)?;
    for f in &skipped_fields {
        warn!("{}: field {f} skipped, {} is zero", input.display(), cfg.factor);
    }
    let rows = with_standardized(&rows, &values);
    create_out_dir(&cfg.out)?;
    write_scores(&cfg.out.join("standardized.csv"), &rows, true)?;
    if cfg.strict && !skipped_fields.is_empty() {
        return Err(StrictViolation(format!(
            "{}: {} is zero in field(s) {}",
            input.display(),
            cfg.factor,
            skipped_fields.join(", ")
        ))
        .into());
    }
    Ok(StandardizeOutcome { rows, skipped_fields })
}

#[derive(Debug, Clone, Serialize)]
pub struct TopShareLine {
    pub p: f64,
    pub cutoff: usize,
    pub marked: usize,
    pub band_violations: usize,
    pub max_abs_deviation_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutlierLine {
    pub median: f64,
    pub mad: f64,
    pub threshold: f64,
    pub total: usize,
    pub incidence_range_pct: f64,
}

/// Contents of the analysis `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub input: String,
    pub column: &'static str,
    pub factor: Option<&'static str>,
    pub fields: usize,
    pub researchers: usize,
    pub band: String,
    pub top_share: Vec<TopShareLine>,
    pub outliers: Option<OutlierLine>,
    pub failed_descriptive: Vec<String>,
    pub failed_gpd: Vec<String>,
}

fn band_label(band: crossfield_core::BandMode) -> String {
    match band {
        crossfield_core::BandMode::PerField => "field".into(),
        crossfield_core::BandMode::Fixed(n) => n.to_string(),
    }
}

/// Descriptive statistics, GPD fits with KS tests, top-share bands,
/// MAD outliers and CCDF data for a scores or standardized table.
///
/// Standardized files are analyzed on `fss_star_std` unless `raw` is set.
pub fn cmd_analyze(cfg: &RunConfig, input: &Path, raw: bool) -> Result<AnalyzeSummary> {
    let (rows, has_std) = read_scores(input)?;
    let (column, kind, factor) = if has_std && !raw {
        (ScoreColumn::Standardized, ScoreKind::Standardized(cfg.factor), Some(cfg.factor.label()))
    } else {
        (ScoreColumn::FssStar, ScoreKind::FssStar, None)
    };
    let sets = score_sets(&rows, column, kind).with_context(|| format!("{}", input.display()))?;
    if sets.is_empty() {
        bail!("{}: no scores to analyze", input.display());
    }
    create_out_dir(&cfg.out)?;

    let mut failed_descriptive = Vec::new();
    let mut w = csv_writer(&cfg.out.join("descriptive.csv"))?;
    w.write_record(["field", "n", "pct_zero", "mean", "cv", "median", "iqr", "skewness", "degenerate", "error"])?;
    for set in &sets {
        match descriptive_stats(set) {
            Ok(d) => w.write_record([
                d.field_id.clone(),
                d.n.to_string(),
                table(d.pct_zero),
                table(d.mean),
                table(d.coeff_variation),
                table(d.median),
                table(d.iqr),
                table(d.skewness),
                d.degenerate.to_string(),
                String::new(),
            ])?,
            Err(e) => {
                warn!("{}: field {}: {e}", input.display(), set.field_id());
                failed_descriptive.push(set.field_id().to_string());
                let mut rec = vec![set.field_id().to_string(), set.len().to_string()];
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(e.to_string());
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;

    let mut failed_gpd = Vec::new();
    let mut w = csv_writer(&cfg.out.join("gpd_fit.csv"))?;
    w.write_record([
        "field",
        "n",
        "k",
        "sigma",
        "mu",
        "log_likelihood",
        "ks_statistic",
        "critical_value_5pct",
        "reject",
        "note",
        "error",
    ])?;
    for set in &sets {
        let scores = set.scores();
        let critical = table(ks_critical_value_5pct(scores.len()));
        match fit_gpd(&scores) {
            Ok(fit) => {
                let ks = ks_test(&scores, &fit);
                w.write_record([
                    set.field_id().to_string(),
                    scores.len().to_string(),
                    table(fit.k),
                    table(fit.sigma),
                    table(fit.mu),
                    table(fit.log_likelihood),
                    table(ks.statistic),
                    critical,
                    ks.reject.to_string(),
                    if shape_at_upper_bound(&fit) { "shape at upper bound".to_string() } else { String::new() },
                    String::new(),
                ])?;
            }
            Err(e) => {
                info!("{}: field {}: {e}", input.display(), set.field_id());
                failed_gpd.push(set.field_id().to_string());
                let mut rec = vec![set.field_id().to_string(), scores.len().to_string()];
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.extend([critical, String::new(), String::new(), e.to_string()]);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;

    let ranking = pooled_ranking(&sets)?;
    let mut top_lines = Vec::new();
    let mut w = csv_writer(&cfg.out.join("top_share.csv"))?;
    w.write_record([
        "p_pct",
        "field",
        "field_size",
        "marked",
        "share_pct",
        "band_lower_pct",
        "band_upper_pct",
        "within_band",
    ])?;
    for &p in &cfg.top {
        let report = top_share(&ranking, p, cfg.band)?;
        for f in &report.fields {
            w.write_record([
                table(100.0 * p),
                f.field.clone(),
                f.field_size.to_string(),
                f.marked.to_string(),
                table(100.0 * f.share),
                table(100.0 * f.band_lower),
                table(100.0 * f.band_upper),
                f.within_band().to_string(),
            ])?;
        }
        top_lines.push(TopShareLine {
            p,
            cutoff: report.cutoff,
            marked: report.marked,
            band_violations: report.band_violations(),
            max_abs_deviation_pct: 100.0 * report.max_abs_deviation(),
        });
    }
    w.flush()?;

    let mut w = csv_writer(&cfg.out.join("outliers.csv"))?;
    w.write_record(["field", "nonzero_n", "outliers", "incidence_pct", "error"])?;
    let outliers = match mad_outliers(&pooled_nonzero(&sets), cfg.mad_threshold) {
        Ok(m) => {
            for f in &m.per_field {
                w.write_record([
                    f.field.clone(),
                    f.nonzero_n.to_string(),
                    f.outliers.to_string(),
                    table(f.incidence_pct),
                    String::new(),
                ])?;
            }
            let nonzero: usize = m.per_field.iter().map(|f| f.nonzero_n).sum();
            let pct = if nonzero == 0 { 0.0 } else { 100.0 * m.total_outliers as f64 / nonzero as f64 };
            w.write_record([
                "TOTAL".to_string(),
                nonzero.to_string(),
                m.total_outliers.to_string(),
                table(pct),
                String::new(),
            ])?;
            Some(OutlierLine {
                median: m.median,
                mad: m.mad,
                threshold: m.threshold,
                total: m.total_outliers,
                incidence_range_pct: m.incidence_range(),
            })
        }
        Err(e) => {
            warn!("{}: outlier analysis: {e}", input.display());
            w.write_record(["TOTAL", "", "", "", &e.to_string()])?;
            None
        }
    };
    w.flush()?;

    let ccdf_dir = cfg.out.join("ccdf");
    create_out_dir(&ccdf_dir)?;
    for set in &sets {
        let mut w = csv_writer(&ccdf_dir.join(format!("{}.csv", field_file_stem(set.field_id()))))?;
        w.write_record(["x", "ccdf"])?;
        for point in ccdf_series(&set.scores(), cfg.offset) {
            w.write_record([full(point.x), full(point.y)])?;
        }
        w.flush()?;
    }

    let summary = AnalyzeSummary {
        input: input.display().to_string(),
        column: match column {
            ScoreColumn::FssStar => "fss_star",
            ScoreColumn::Standardized => "fss_star_std",
        },
        factor,
        fields: sets.len(),
        researchers: sets.iter().map(ScoreSet::len).sum(),
        band: band_label(cfg.band),
        top_share: top_lines,
        outliers,
        failed_descriptive,
        failed_gpd,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub rng: &'static str,
    pub seed: u64,
    pub specs: String,
    pub fields: usize,
    pub researchers: usize,
    pub band: String,
    /// Factor labels, best first, per top fraction.
    pub ranking: Vec<(f64, Vec<&'static str>)>,
    pub evaluation: EvaluationResult,
}

fn write_evaluation_row(w: &mut csv::Writer<File>, p: f64, position: String, k: &KindEvaluation) -> Result<()> {
    let t = k.at(p).expect("every p evaluated");
    w.write_record([
        table(100.0 * p),
        position,
        k.label().to_string(),
        t.band_violations.to_string(),
        table(100.0 * t.max_abs_deviation),
        t.worst_field.clone(),
        table(100.0 * t.worst_share),
        k.ccdf_spread.map(table).unwrap_or_default(),
        k.outliers.map(|o| o.to_string()).unwrap_or_default(),
        k.outlier_incidence_range.map(table).unwrap_or_default(),
        k.skipped_fields.join(";"),
    ])?;
    Ok(())
}

/// Generate a synthetic population, standardize it with every factor and
/// rank the factors by band violations and CCDF spread.
pub fn cmd_simulate(cfg: &RunConfig, specs_path: Option<&Path>) -> Result<SimulateSummary> {
    let (specs, source) = match specs_path {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
            let file = SpecFile::parse(&text).with_context(|| format!("{}", path.display()))?;
            (file.fields, path.display().to_string())
        }
        None => (benchmark_specs(), "builtin:benchmark".to_string()),
    };
    let stipends = cfg.stipends()?;
    let population = generate_population(&specs, cfg.seed)?;
    create_out_dir(&cfg.out)?;

    let rows: Vec<ScoreRow> = population
        .iter()
        .flat_map(|field| {
            field.scores.entries().iter().zip(&field.ranks).map(|(e, &rank)| ScoreRow {
                researcher: e.researcher.clone(),
                field: field.scores.field_id().to_string(),
                rank,
                t: SYNTHETIC_YEARS,
                fss: e.score * stipends.coefficient(rank),
                fss_star: e.score,
                fss_star_std: None,
            })
        })
        .collect();
    write_scores(&cfg.out.join("scores.csv"), &rows, false)?;

    let sets: Vec<ScoreSet> = population.into_iter().map(|f| f.scores).collect();
    for kind in ScalingFactorKind::ALL {
        let (values, _) = standardize_all(&sets, kind)?;
        let dir = cfg.out.join(kind.label());
        create_out_dir(&dir)?;
        write_scores(&dir.join("standardized.csv"), &with_standardized(&rows, &values), true)?;
    }

    let eval_cfg = EvaluationConfig { p_values: cfg.top.clone(), band: cfg.band, mad_threshold: cfg.mad_threshold };
    let evaluation = evaluate_scaling_factors(&sets, &eval_cfg)?;
    let mut w = csv_writer(&cfg.out.join("evaluation.csv"))?;
    w.write_record([
        "p_pct",
        "position",
        "factor",
        "band_violations",
        "max_abs_deviation_pct",
        "worst_field",
        "worst_share_pct",
        "ccdf_spread",
        "outliers",
        "outlier_incidence_range",
        "skipped_fields",
    ])?;
    let mut ranking = Vec::new();
    for &p in &cfg.top {
        let ranked = evaluation.ranked(p);
        for (i, k) in ranked.iter().enumerate() {
            write_evaluation_row(&mut w, p, (i + 1).to_string(), k)?;
        }
        write_evaluation_row(&mut w, p, String::new(), &evaluation.unstandardized)?;
        ranking.push((p, ranked.iter().map(|k| k.label()).collect()));
    }
    w.flush()?;

    let summary = SimulateSummary {
        rng: RNG_ALGORITHM,
        seed: cfg.seed,
        specs: source,
        fields: sets.len(),
        researchers: rows.len(),
        band: band_label(cfg.band),
        ranking,
        evaluation,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileRow {
    pub researcher: String,
    pub field: String,
    pub fss_star: f64,
    pub percentile_rank: f64,
    pub fss_star_std: Option<f64>,
}

/// Within-field percentile rank of FSS*, next to the standardized value
/// when the input carries one. Written to `percentile.csv`.
pub fn cmd_percentile(cfg: &RunConfig, input: &Path) -> Result<Vec<PercentileRow>> {
    let (rows, has_std) = read_scores(input)?;
    let sets =
        score_sets(&rows, ScoreColumn::FssStar, ScoreKind::FssStar).with_context(|| format!("{}", input.display()))?;
    let by_field: HashMap<&str, &ScoreSet> = sets.iter().map(|s| (s.field_id(), s)).collect();
    let out: Vec<PercentileRow> = rows
        .iter()
        .map(|r| {
            let pr = percentile_rank(by_field[r.field.as_str()], &r.researcher)?;
            Ok(PercentileRow {
                researcher: r.researcher.clone(),
                field: r.field.clone(),
                fss_star: r.fss_star,
                percentile_rank: pr,
                fss_star_std: r.fss_star_std,
            })
        })
        .collect::<Result<_>>()?;

    create_out_dir(&cfg.out)?;
    let mut w = csv_writer(&cfg.out.join("percentile.csv"))?;
    let mut header = vec!["researcher", "field", "fss_star", "percentile_rank"];
    if has_std {
        header.push("fss_star_std");
    }
    w.write_record(&header)?;
    for r in &out {
        let mut rec = vec![r.researcher.clone(), r.field.clone(), full(r.fss_star), table(r.percentile_rank)];
        if has_std {
            rec.push(r.fss_star_std.map(full).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(out)
}
