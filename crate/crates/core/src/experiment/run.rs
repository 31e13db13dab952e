use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DatasetConfig, ExperimentConfig};
use crate::corpus::{class_skew, GoldReport};
use crate::evaluator::{best_f1, labels_to_convergence};
use crate::session::{mean_f1, write_log, IterationLog, Session, SessionConfig, TerminationReason};
use crate::{rng, Error, MatchingTask, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.csv";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces every session's master seed.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Replaces the config's output directory.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChecksum {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub pairs: usize,
    pub matches: usize,
    pub skew: f64,
    pub gold: Option<GoldReport>,
    pub files: Vec<FileChecksum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run: usize,
    pub master_seed: u64,
    pub log: String,
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub name: String,
    pub dir: String,
    pub config: SessionConfig,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub sessions: Vec<SessionEntry>,
}

/// One row of `summary.csv`, computed on the mean F1 series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub session: String,
    pub selector: String,
    pub learner: String,
    pub runs: usize,
    pub best_f1: f64,
    pub labels_at_best: usize,
    pub labels_to_convergence: usize,
    pub final_f1: f64,
    pub final_labels: usize,
    pub iterations: usize,
    pub termination: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub summary: Vec<SummaryRow>,
    /// Logs per session, then per run.
    pub logs: Vec<Vec<Vec<IterationLog>>>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(hasher.finalize()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_trace(path: &Path, session: &Session) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for t in session.trace() {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn dataset_summary(config: &ExperimentConfig, task: &MatchingTask) -> Result<DatasetSummary> {
    let files = match &config.dataset {
        DatasetConfig::Files(d) => d
            .files()
            .into_iter()
            .map(|(role, p)| {
                Ok(FileChecksum {
                    role: role.into(),
                    path: p.to_path_buf(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?,
        DatasetConfig::Synthetic(_) => Vec::new(),
    };
    Ok(DatasetSummary {
        name: task.name.clone(),
        pairs: task.len(),
        matches: task.pairs.iter().filter(|p| p.gold_label == Some(1)).count(),
        skew: class_skew(&task.pairs),
        gold: task.gold_report.clone(),
        files,
    })
}

fn session_configs(config: &ExperimentConfig, opts: &RunOptions) -> Vec<SessionConfig> {
    config
        .sessions
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Some(seed) = opts.seed {
                s.master_seed = seed;
            }
            s
        })
        .collect()
}

/// Loads the dataset and runs every session `repeats` times, in parallel.
///
/// Run `r` of a session uses `child_seed(master_seed, r)`. The manifest is
/// written before any session starts and each run's log is written as soon
/// as that run ends, so a failing run leaves the others' artifacts behind.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutcome> {
    let task = Arc::new(config.dataset.load()?);
    run_on_task(config, task, opts)
}

/// [`run_experiment`] with the dataset already loaded.
pub fn run_on_task(config: &ExperimentConfig, task: Arc<MatchingTask>, opts: &RunOptions) -> Result<ExperimentOutcome> {
    let out_dir = opts.out.clone().unwrap_or_else(|| config.output.clone());
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let sessions = session_configs(config, opts);
    let entries: Vec<SessionEntry> = sessions
        .iter()
        .map(|s| {
            let name = s.display_name();
            SessionEntry {
                dir: name.clone(),
                name,
                config: s.clone(),
                runs: (0..config.repeats)
                    .map(|r| RunEntry {
                        run: r,
                        master_seed: rng::child_seed(s.master_seed, r as u64),
                        log: format!("run-{r}.csv"),
                        trace: format!("trace-{r}.jsonl"),
                    })
                    .collect(),
            }
        })
        .collect();
    for e in &entries {
        let dir = out_dir.join(&e.dir);
        std::fs::create_dir_all(&dir).map_err(|err| Error::io(&dir, err))?;
    }
    let manifest = Manifest {
        name: config.name.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        dataset: dataset_summary(config, &task)?,
        sessions: entries,
    };
    write_json(&out_dir.join(MANIFEST), &manifest)?;

    let units: Vec<(usize, usize)> = (0..sessions.len())
        .flat_map(|s| (0..config.repeats).map(move |r| (s, r)))
        .collect();
    let work = || -> Vec<Result<(Vec<IterationLog>, TerminationReason)>> {
        units
            .par_iter()
            .map(|&(s, r)| {
                let entry = &manifest.sessions[s];
                let mut cfg = sessions[s].clone();
                cfg.master_seed = entry.runs[r].master_seed;
                let mut session = Session::new(cfg, task.clone())?;
                let outcome = session.run();
                let dir = out_dir.join(&entry.dir);
                write_log(&dir.join(&entry.runs[r].log), session.logs())?;
                write_trace(&dir.join(&entry.runs[r].trace), &session)?;
                Ok((session.logs().to_vec(), outcome?))
            })
            .collect()
    };
    let results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut logs: Vec<Vec<Vec<IterationLog>>> = vec![Vec::new(); sessions.len()];
    let mut reasons: Vec<Vec<TerminationReason>> = vec![Vec::new(); sessions.len()];
    let mut first_error = None;
    for (&(s, _), res) in units.iter().zip(results) {
        match res {
            Ok((l, reason)) => {
                logs[s].push(l);
                reasons[s].push(reason);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let summary: Vec<SummaryRow> = sessions
        .iter()
        .zip(&logs)
        .zip(&reasons)
        .map(|((cfg, runs), reasons)| summarize(cfg, runs, reasons, config))
        .collect();
    let path = out_dir.join(SUMMARY);
    let mut w = csv::Writer::from_path(&path)?;
    for row in &summary {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    Ok(ExperimentOutcome {
        out_dir,
        manifest,
        summary,
        logs,
    })
}

fn summarize(
    cfg: &SessionConfig,
    runs: &[Vec<IterationLog>],
    reasons: &[TerminationReason],
    config: &ExperimentConfig,
) -> SummaryRow {
    let series = mean_f1(runs);
    let (best, at_best) = best_f1(&series).unwrap_or((0.0, 0));
    let last = series.last().copied().unwrap_or((0, 0.0));
    let mut termination: Vec<String> = reasons
        .iter()
        .map(|r| serde_json::to_value(r).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default())
        .collect();
    termination.sort();
    termination.dedup();
    SummaryRow {
        session: cfg.display_name(),
        selector: cfg.selector.to_string(),
        learner: cfg.learner.kind().to_string(),
        runs: runs.len(),
        best_f1: best,
        labels_at_best: at_best,
        labels_to_convergence: labels_to_convergence(&series, config.convergence_epsilon, config.convergence_window),
        final_f1: last.1,
        final_labels: last.0,
        iterations: series.len(),
        termination: termination.join(";"),
    }
}

pub fn read_manifest(run_dir: &Path) -> Result<Manifest> {
    let path = run_dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        message: e.to_string(),
    })
}
