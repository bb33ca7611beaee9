//! Statistical battery applied to productivity distributions: descriptive
//! statistics, generalized Pareto fit with Kolmogorov-Smirnov goodness of
//! fit, complementary CDF plot data and MAD outlier detection.

mod ccdf;
mod descriptive;
mod gpd;
mod ks;
mod mad;

use thiserror::Error;

pub use ccdf::{ccdf_series, CcdfPoint, DEFAULT_CCDF_OFFSET};
pub use descriptive::{descriptive_stats, DescriptiveStats};
pub use gpd::{fit_gpd, gpd_log_likelihood, shape_at_upper_bound, start_grid, Gpd, GpdFit, MIN_FIT_SAMPLES};
pub use ks::{ks_critical_value_5pct, ks_statistic, ks_test, KsResult, KS_COEFFICIENT_5PCT};
pub use mad::{mad_outliers, pooled_nonzero, FieldIncidence, MadOutcome, DEFAULT_MAD_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("scores must be finite and >= 0, found {0}")]
    NegativeScore(f64),
    #[error("outlier detection needs strictly positive scores, found {0}")]
    NonPositiveScore(f64),
    #[error("no feasible generalized Pareto parameters found")]
    FitFailure,
    #[error("median absolute deviation is zero (median {median}); more than half the values coincide")]
    DegenerateMad { median: f64 },
}
