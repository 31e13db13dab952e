use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::{read_manifest, SummaryRow, SUMMARY};
use crate::session::{read_log, IterationLog};
use crate::{Error, Result};

pub const REPORT_DIR: &str = "report";

/// Per-iteration series of one session: the mean over runs plus every run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSeries {
    pub session: String,
    pub labels: Vec<usize>,
    pub mean_f1: Vec<f64>,
    /// `per_run_f1[r][i]`; `None` once run `r` has stopped.
    pub per_run_f1: Vec<Vec<Option<f64>>>,
    /// Mean milliseconds per iteration: train, committee, scoring, user wait.
    pub mean_times: Vec<[f64; 4]>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub run_dir: PathBuf,
    pub series: Vec<SessionSeries>,
    pub summary: Vec<SummaryRow>,
    /// Delimited files written under `report/`.
    pub files: Vec<PathBuf>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Aligns runs by iteration. Means at an iteration cover the runs still going.
pub fn session_series(session: &str, runs: &[Vec<IterationLog>]) -> SessionSeries {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    let mut s = SessionSeries {
        session: session.into(),
        labels: Vec::with_capacity(len),
        mean_f1: Vec::with_capacity(len),
        per_run_f1: runs.iter().map(|r| (0..len).map(|i| r.get(i).map(|l| l.f1)).collect()).collect(),
        mean_times: Vec::with_capacity(len),
    };
    for i in 0..len {
        let rows: Vec<&IterationLog> = runs.iter().filter_map(|r| r.get(i)).collect();
        s.labels.push(rows[0].labels_used);
        s.mean_f1.push(mean(rows.iter().map(|l| l.f1)));
        s.mean_times.push([
            mean(rows.iter().map(|l| ms(l.train_time))),
            mean(rows.iter().map(|l| ms(l.committee_creation_time))),
            mean(rows.iter().map(|l| ms(l.scoring_time))),
            mean(rows.iter().map(|l| ms(l.user_wait_time))),
        ]);
    }
    s
}

fn write_series(dir: &Path, s: &SessionSeries) -> Result<[PathBuf; 2]> {
    let f1_path = dir.join(format!("{}-f1.csv", s.session));
    let mut w = csv::Writer::from_path(&f1_path)?;
    let mut header = vec!["iteration".to_string(), "labels_used".into(), "mean_f1".into()];
    header.extend((0..s.per_run_f1.len()).map(|r| format!("f1_run{r}")));
    w.write_record(&header)?;
    for i in 0..s.labels.len() {
        let mut row = vec![(i + 1).to_string(), s.labels[i].to_string(), s.mean_f1[i].to_string()];
        row.extend(s.per_run_f1.iter().map(|r| r[i].map_or(String::new(), |v| v.to_string())));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&f1_path, e))?;

    let time_path = dir.join(format!("{}-time.csv", s.session));
    let mut w = csv::Writer::from_path(&time_path)?;
    w.write_record([
        "iteration",
        "labels_used",
        "train_time",
        "committee_creation_time",
        "scoring_time",
        "user_wait_time",
    ])?;
    for i in 0..s.labels.len() {
        let t = s.mean_times[i];
        w.write_record([
            (i + 1).to_string(),
            s.labels[i].to_string(),
            t[0].to_string(),
            t[1].to_string(),
            t[2].to_string(),
            t[3].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&time_path, e))?;
    Ok([f1_path, time_path])
}

/// Reads a run directory and writes F1-vs-labels and time-vs-labels series
/// for every session into `report/`.
pub fn report(run_dir: &Path) -> Result<Report> {
    let manifest = read_manifest(run_dir)?;
    let out = run_dir.join(REPORT_DIR);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut series = Vec::new();
    let mut files = Vec::new();
    for entry in &manifest.sessions {
        let runs = entry
            .runs
            .iter()
            .map(|r| read_log(&run_dir.join(&entry.dir).join(&r.log)))
            .collect::<Result<Vec<_>>>()?;
        if runs.iter().all(Vec::is_empty) {
            return Err(Error::Session(format!("session {} has no logged iterations", entry.name)));
        }
        let s = session_series(&entry.name, &runs);
        files.extend(write_series(&out, &s)?);
        series.push(s);
    }
    let summary_path = run_dir.join(SUMMARY);
    let summary = match csv::Reader::from_path(&summary_path) {
        Ok(mut r) => r.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?,
        Err(_) => Vec::new(),
    };
    Ok(Report {
        run_dir: run_dir.to_path_buf(),
        series,
        summary,
        files,
    })
}

impl Report {
    /// Plain-text comparison table, one row per session.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self.series.iter().map(|s| s.session.len()).max().unwrap_or(7).max(7);
        let _ = writeln!(
            out,
            "{:<width$}  {:>4}  {:>7}  {:>8}  {:>11}  {:>8}  {:>10}",
            "session", "runs", "best_f1", "labels", "convergence", "final_f1", "iterations"
        );
        for s in &self.series {
            let (best, at) = s
                .mean_f1
                .iter()
                .zip(&s.labels)
                .fold((f64::NEG_INFINITY, 0), |b, (&f, &l)| if f > b.0 { (f, l) } else { b });
            let conv = self
                .summary
                .iter()
                .find(|r| r.session == s.session)
                .map_or("-".to_string(), |r| r.labels_to_convergence.to_string());
            let _ = writeln!(
                out,
                "{:<width$}  {:>4}  {:>7.3}  {:>8}  {:>11}  {:>8.3}  {:>10}",
                s.session,
                s.per_run_f1.len(),
                best,
                at,
                conv,
                s.mean_f1.last().copied().unwrap_or(0.0),
                s.labels.len()
            );
        }
        out
    }
}
