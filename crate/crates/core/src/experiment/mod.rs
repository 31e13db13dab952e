//! Experiment configs, batch runs and report series.
//!
//! A run directory holds `manifest.json`, `summary.csv` and one directory per
//! session with `run-<r>.csv` logs and `trace-<r>.jsonl` selection traces.

mod config;
mod report;
mod run;

pub use config::{AlignedAttribute, ConfigError, DatasetConfig, ExperimentConfig, FileDataset, DATA_DIR_ENV};
pub use report::{report, session_series, Report, SessionSeries, REPORT_DIR};
pub use run::{
    read_manifest, run_experiment, run_on_task, sha256_file, DatasetSummary, ExperimentOutcome, FileChecksum, Manifest,
    RunEntry, RunOptions, SessionEntry, SummaryRow, MANIFEST, SUMMARY,
};
