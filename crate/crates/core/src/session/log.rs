use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One row of the run log. Times are milliseconds in serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub labels_used: usize,
    /// Size of the labeled set the model was trained on.
    pub labeled: usize,
    pub pool: usize,
    /// Pairs removed by accepted ensemble members.
    pub covered: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(with = "crate::timing")]
    pub train_time: Duration,
    #[serde(with = "crate::timing")]
    pub committee_creation_time: Duration,
    #[serde(with = "crate::timing")]
    pub scoring_time: Duration,
    #[serde(with = "crate::timing")]
    pub user_wait_time: Duration,
    pub n_atoms: Option<usize>,
    pub depth: Option<usize>,
    pub ensemble_size: Option<usize>,
    pub dot_products: usize,
    pub skipped: usize,
}

impl IterationLog {
    /// Column names that carry wall-clock measurements.
    pub const TIMING_COLUMNS: [&'static str; 4] =
        ["train_time", "committee_creation_time", "scoring_time", "user_wait_time"];
}

pub fn write_log(path: &Path, rows: &[IterationLog]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_log(path: &Path) -> Result<Vec<IterationLog>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let rows = r.deserialize().collect::<std::result::Result<Vec<IterationLog>, _>>()?;
    Ok(rows)
}

/// Log text with the timing columns removed, for comparing runs.
pub fn strip_timing(log_csv: &str) -> Result<String> {
    let mut r = csv::Reader::from_reader(log_csv.as_bytes());
    let header = r.headers()?.clone();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| !IterationLog::TIMING_COLUMNS.contains(&&header[i]))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&i| &header[i]))?;
    for rec in r.records() {
        let rec = rec?;
        w.write_record(keep.iter().map(|&i| &rec[i]))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv input was utf-8"))
}
