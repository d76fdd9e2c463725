//! Experiment harness: config parsing, grid execution, CSV reports, and
//! scaling-exponent fits.

pub mod config;
mod run;

pub use config::{AlgorithmSpec, EnvTemplate, ExperimentConfig, MetaConfig, ALGORITHM_NAMES};
pub use run::{
    build_forecaster, fit_exponent, fit_metric_exponent, median, metrics_row, rows_csv, run_cell,
    run_experiment, run_forecaster, summary_csv, sweep, ReportRow, SweepReport,
};
