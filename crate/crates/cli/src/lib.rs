//! Library side of the `crossfield` command: run configuration, the scores
//! table format and one function per subcommand.

pub mod commands;
pub mod config;
pub mod records;

pub use commands::{
    cmd_analyze, cmd_percentile, cmd_score, cmd_simulate, cmd_standardize, ScoreInputs, StrictViolation,
};
pub use config::RunConfig;
