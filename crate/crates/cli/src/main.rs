use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use crossfield::config::{parse_band, parse_top_list};
use crossfield::records::table;
use crossfield::{RunConfig, ScoreInputs, StrictViolation};
use crossfield_core::ScalingFactorKind;

const EXIT_FAILURE: u8 = 1;
/// Distinct from clap's usage-error status 2.
const EXIT_STRICT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "crossfield",
    version,
    about = "Field-normalized research productivity scoring and cross-field standardization"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Scaling factor: mean_all, mean_nonzero, median_all or median_nonzero.
    #[arg(long, global = true, default_value = "mean_nonzero", value_parser = |s: &str| s.parse::<ScalingFactorKind>())]
    factor: ScalingFactorKind,
    /// Comma-separated top fractions.
    #[arg(long, global = true, default_value = "0.05,0.10,0.20")]
    top: String,
    /// Reference size for the admissible share band, or `field` for each field's own size.
    #[arg(long = "band-n", global = true, default_value = "field")]
    band_n: String,
    #[arg(long, global = true, default_value_t = 5.0)]
    mad_threshold: f64,
    /// Offset added to scores in CCDF output.
    #[arg(long, global = true, default_value_t = 0.05)]
    offset: f64,
    /// CSV with header `rank,coefficient` overriding stipend coefficients.
    #[arg(long, global = true)]
    stipend_table: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 2013)]
    seed: u64,
    /// Fail when a field has to be skipped.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute FSS and FSS* per researcher.
    Score {
        researchers: PathBuf,
        publications: PathBuf,
        /// Precomputed `year,category,mean_cited` baselines.
        #[arg(long)]
        baselines: Option<PathBuf>,
        /// Leave out fields where fewer members than this share have a cited publication.
        #[arg(long, default_value_t = 0.0)]
        min_cited_share: f64,
    },
    /// Add standardized FSS* to a scores table.
    Standardize { input: PathBuf },
    /// Descriptive statistics, GPD fits, top shares, outliers and CCDF data.
    Analyze {
        input: PathBuf,
        /// Analyze fss_star even when fss_star_std is present.
        #[arg(long)]
        raw: bool,
    },
    /// Synthetic population and scaling-factor evaluation.
    Simulate {
        /// TOML field specs; the built-in 18-field benchmark when omitted.
        #[arg(long)]
        specs: Option<PathBuf>,
    },
    /// Within-field percentile ranks of FSS*.
    Percentile { input: PathBuf },
}

fn config(global: GlobalArgs, inputs: Vec<PathBuf>) -> Result<RunConfig> {
    let cfg = RunConfig {
        inputs,
        factor: global.factor,
        top: parse_top_list(&global.top).map_err(|e| e.context("--top"))?,
        band: parse_band(&global.band_n).map_err(|e| e.context("--band-n"))?,
        mad_threshold: global.mad_threshold,
        offset: global.offset,
        stipend_table: global.stipend_table,
        out: global.out,
        seed: global.seed,
        strict: global.strict,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score { researchers, publications, baselines, min_cited_share } => {
            let mut paths = vec![researchers.clone(), publications.clone()];
            paths.extend(baselines.clone());
            let cfg = config(cli.global, paths)?;
            let inputs = ScoreInputs { researchers, publications, baselines, min_cited_share };
            let out = crossfield::cmd_score(&cfg, &inputs)?;
            println!("scored {} researchers -> {}", out.rows.len(), cfg.out.join("scores.csv").display());
        }
        Command::Standardize { input } => {
            let cfg = config(cli.global, vec![input.clone()])?;
            let out = crossfield::cmd_standardize(&cfg, &input)?;
            println!(
                "standardized {} rows by {} -> {}",
                out.rows.len(),
                cfg.factor,
                cfg.out.join("standardized.csv").display()
            );
            if !out.skipped_fields.is_empty() {
                println!("skipped fields: {}", out.skipped_fields.join(", "));
            }
        }
        Command::Analyze { input, raw } => {
            let cfg = config(cli.global, vec![input.clone()])?;
            let s = crossfield::cmd_analyze(&cfg, &input, raw)?;
            println!(
                "analyzed {} researchers in {} fields ({}) -> {}",
                s.researchers,
                s.fields,
                s.column,
                cfg.out.display()
            );
            for t in &s.top_share {
                println!("top {}%: {} band violations", table(100.0 * t.p), t.band_violations);
            }
        }
        Command::Simulate { specs } => {
            let cfg = config(cli.global, specs.iter().cloned().collect())?;
            let s = crossfield::cmd_simulate(&cfg, specs.as_deref())?;
            println!(
                "simulated {} researchers in {} fields, seed {} -> {}",
                s.researchers,
                s.fields,
                s.seed,
                cfg.out.display()
            );
            for (p, order) in &s.ranking {
                println!("top {}%: {}", table(100.0 * p), order.join(" > "));
            }
        }
        Command::Percentile { input } => {
            let cfg = config(cli.global, vec![input.clone()])?;
            let rows = crossfield::cmd_percentile(&cfg, &input)?;
            println!("ranked {} researchers -> {}", rows.len(), cfg.out.join("percentile.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CROSSFIELD_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<StrictViolation>().is_some() {
                ExitCode::from(EXIT_STRICT)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
