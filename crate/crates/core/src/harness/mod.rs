//! Experiment harness behind the `ldp-erm` binary: configuration, synthetic
//! data, non-private baselines, sweep execution and CSV reports.

pub mod baseline;
pub mod config;
pub mod datasets;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Family, Mechanism};
pub use experiment::{cells, run_experiment, write_outputs, Cell, RunOutcome};
pub use report::{Manifest, ReportRow, REPORT_HEADER};
