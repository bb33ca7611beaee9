use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use crossfield_core::ingest::load_stipend_table;
use crossfield_core::{BandMode, ScalingFactorKind, StipendTable};

/// Settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub factor: ScalingFactorKind,
    pub top: Vec<f64>,
    pub band: BandMode,
    pub mad_threshold: f64,
    pub offset: f64,
    pub stipend_table: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub strict: bool,
}

impl RunConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            inputs: Vec::new(),
            factor: ScalingFactorKind::MeanNonzero,
            top: crossfield_core::synth::DEFAULT_TOP_FRACTIONS.to_vec(),
            band: BandMode::PerField,
            mad_threshold: crossfield_core::analysis::DEFAULT_MAD_THRESHOLD,
            offset: crossfield_core::analysis::DEFAULT_CCDF_OFFSET,
            stipend_table: None,
            out: out.into(),
            seed: 0,
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for path in self.inputs.iter().chain(&self.stipend_table) {
            ensure!(path.exists(), "{}: no such file", path.display());
        }
        ensure!(!self.top.is_empty(), "--top: at least one fraction required");
        for &p in &self.top {
            ensure!(p > 0.0 && p < 1.0, "--top: {p} is not in (0, 1)");
        }
        ensure!(self.mad_threshold > 0.0, "--mad-threshold: must be positive");
        ensure!(self.offset > 0.0 && self.offset.is_finite(), "--offset: must be positive");
        Ok(())
    }

    pub fn stipends(&self) -> Result<StipendTable> {
        match &self.stipend_table {
            None => Ok(StipendTable::default()),
            Some(path) => read_stipends(path),
        }
    }
}

fn read_stipends(path: &Path) -> Result<StipendTable> {
    let file = std::fs::File::open(path).with_context(|| format!("{}", path.display()))?;
    load_stipend_table(file).map_err(|e| e.in_file(path).into())
}

/// `field` or a positive reference size.
pub fn parse_band(s: &str) -> Result<BandMode> {
    if s.eq_ignore_ascii_case("field") {
        return Ok(BandMode::PerField);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(BandMode::Fixed(n)),
        _ => bail!("expected `field` or a positive integer, got `{s}`"),
    }
}

/// Comma-separated fractions in (0, 1).
pub fn parse_top_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let p: f64 = t.parse().with_context(|| format!("not a number: `{t}`"))?;
            ensure!(p > 0.0 && p < 1.0, "{p} is not in (0, 1)");
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        assert_eq!(parse_band("field").unwrap(), BandMode::PerField);
        assert_eq!(parse_band("88").unwrap(), BandMode::Fixed(88));
        assert!(parse_band("0").is_err());
        assert!(parse_band("x").is_err());
    }

    #[test]
    fn top_list_parsing() {
        assert_eq!(parse_top_list("0.05,0.10, 0.20").unwrap(), vec![0.05, 0.10, 0.20]);
        assert!(parse_top_list("0.05,1.0").is_err());
        assert!(parse_top_list("abc").is_err());
    }

    #[test]
    fn missing_input_rejected() {
        let mut cfg = RunConfig::new("out");
        cfg.inputs.push(PathBuf::from("/nonexistent/researchers.csv"));
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/researchers.csv"));
    }
}
