//! Field-normalized research productivity for individual researchers.
//!
//! The pipeline turns a roster and its publications into FSS (fractional,
//! citation-normalized yearly output) and FSS* (FSS per unit of stipend),
//! standardizes FSS* across fields with one of four scaling factors, and
//! checks how comparable the standardized fields are: generalized Pareto
//! fits, Kolmogorov-Smirnov tests, CCDF curves, shares of the pooled top
//! percentiles, and MAD outlier incidence.

pub mod analysis;
pub mod indicator;
pub mod ingest;
pub mod model;
pub mod scaling;
pub mod stats;
pub mod synth;

pub use model::{
    stipend_coefficient, validate_roster, AcademicRank, AuthorRef, Authorship, BylineConvention, CitationBaseline,
    Publication, Researcher, ScoreEntry, ScoreKind, ScoreSet, StipendTable,
};
pub use scaling::{BandMode, ScalingFactorKind};
