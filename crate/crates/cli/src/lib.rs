//! Experiment harness for `btlab`: configuration, the experiment kinds, the
//! acceptance suite and CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Format, Kind, RawConfig};
pub use error::{CliError, CliResult};
pub use experiment::run_experiment;
pub use report::{ComparisonRecord, ReportRow, Verdict};
