//! Session registry, snapshots and on-disk checkpoints.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use emal::evaluator::{count_atoms, interpretability};
use emal::oracle::OracleMode;
use emal::session::{IterationLog, Session, SessionConfig};
use emal::{Label, MatchingTask};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::types::{
    BatchItem, CreateSession, EnsembleMember, ModelSummary, PendingBatch, SessionState, Status, SubmitResponse,
};

/// What a reader sees; replaced wholesale after every write.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: SessionState,
    pub batch: Option<PendingBatch>,
    pub logs: Arc<Vec<IterationLog>>,
    pub model: Arc<ModelSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    session_id: String,
    dataset: String,
    created_at: DateTime<Utc>,
    config: SessionConfig,
    /// Answers the session has absorbed, in order.
    history: Vec<(usize, Label)>,
    /// Answers to the pending batch so far.
    partial: Vec<(usize, Label)>,
}

pub struct Entry {
    pub id: String,
    pub dataset: String,
    created_at: DateTime<Utc>,
    session: Mutex<Session>,
    snapshot: RwLock<Snapshot>,
}

/// Answers any pending batch that needs no human (gold seed) and moves on.
fn settle(session: &mut Session) -> emal::Result<()> {
    while session.pending().is_some() && session.unanswered().is_empty() {
        session.step()?;
    }
    Ok(())
}

fn batch_of(id: &str, session: &Session) -> Option<PendingBatch> {
    let pending = session.pending()?;
    let task = session.task();
    let n_attr = task.n_attributes().max(1);
    let items = pending
        .pair_ids
        .iter()
        .map(|&pair_id| {
            let values = task.pair_values(pair_id).expect("pending ids are task pairs");
            let row = task.features.row(pair_id);
            BatchItem {
                pair_id,
                left_values: values.left_values,
                right_values: values.right_values,
                attributes: task.schema.attributes.clone(),
                similarities: row.chunks((row.len() / n_attr).max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect(),
            }
        })
        .collect();
    Some(PendingBatch {
        session_id: id.into(),
        iteration: pending.iteration,
        items,
        answered: pending
            .pair_ids
            .iter()
            .filter_map(|&p| session.answer(p).map(|l| (p, l)))
            .collect(),
    })
}

fn model_of(id: &str, session: &Session) -> ModelSummary {
    let schema = &session.task().schema;
    let report = session.model().and_then(|m| interpretability(m, schema));
    ModelSummary {
        session_id: id.into(),
        iteration: session.logs().last().map_or(0, |l| l.iteration),
        learner: session.config().learner.kind().to_string(),
        trained: session.model().is_some(),
        n_atoms: report.as_ref().map(|r| r.n_atoms),
        depth: report.as_ref().and_then(|r| r.max_depth),
        rules: report.map(|r| r.dnf_text).unwrap_or_default(),
        ensemble: session
            .ensemble()
            .map(|e| {
                e.accepted
                    .iter()
                    .map(|a| EnsembleMember {
                        iteration: a.iteration,
                        precision: a.precision,
                        n_atoms: count_atoms(&a.model),
                        rules: interpretability(&a.model, schema).map(|r| r.dnf_text).unwrap_or_default(),
                    })
                    .collect()
            })
            .unwrap_or_default(),
    }
}

impl Entry {
    fn new(id: String, dataset: String, created_at: DateTime<Utc>, session: Session) -> Self {
        let snapshot = Self::snapshot_of(&id, &dataset, created_at, &session);
        Self {
            id,
            dataset,
            created_at,
            session: Mutex::new(session),
            snapshot: RwLock::new(snapshot),
        }
    }

    fn snapshot_of(id: &str, dataset: &str, created_at: DateTime<Utc>, session: &Session) -> Snapshot {
        let pending = session.pending();
        Snapshot {
            state: SessionState {
                session_id: id.into(),
                dataset: dataset.into(),
                status: if pending.is_some() {
                    Status::AwaitingLabels
                } else {
                    Status::Terminated
                },
                iteration: pending.map_or_else(|| session.logs().last().map_or(0, |l| l.iteration), |p| p.iteration),
                labels_used: session.labels_used(),
                label_budget: session.config().termination.label_budget,
                remaining: session.unanswered(),
                termination: session.terminated(),
                created_at,
                updated_at: Utc::now(),
            },
            batch: batch_of(id, session),
            logs: Arc::new(session.logs().to_vec()),
            model: Arc::new(model_of(id, session)),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, session: &Session) {
        *self.snapshot.write().expect("snapshot lock") = Self::snapshot_of(&self.id, &self.dataset, self.created_at, session);
    }

    fn checkpoint(&self, session: &Session) -> Checkpoint {
        let partial = session
            .pending()
            .map(|p| p.pair_ids.iter().filter_map(|&id| session.answer(id).map(|l| (id, l))).collect())
            .unwrap_or_default();
        Checkpoint {
            session_id: self.id.clone(),
            dataset: self.dataset.clone(),
            created_at: self.created_at,
            config: session.config().clone(),
            history: session.history().to_vec(),
            partial,
        }
    }

    /// Applies one submission. Runs the retrain inline, so call it off the
    /// async executor.
    pub fn submit(&self, labels: &BTreeMap<usize, Label>, checkpoint_dir: Option<&Path>) -> Result<SubmitResponse, ApiError> {
        let mut session = self.session.lock().expect("session lock");
        let completes = session.unanswered().iter().all(|id| labels.contains_key(id));
        if completes {
            self.snapshot.write().expect("snapshot lock").state.status = Status::Training;
        }
        let before = session.logs().len();
        let labels: Vec<(usize, Label)> = labels.iter().map(|(&k, &v)| (k, v)).collect();
        let result = session.submit(&labels).and_then(|advanced| {
            settle(&mut session)?;
            Ok(advanced)
        });
        self.publish(&session);
        let advanced = result?;
        if let Some(dir) = checkpoint_dir {
            write_checkpoint(dir, &self.checkpoint(&session))?;
        }
        let snap = self.snapshot();
        Ok(SubmitResponse {
            state: snap.state,
            advanced,
            batch: snap.batch,
            log: (session.logs().len() > before).then(|| session.logs().last().cloned()).flatten(),
        })
    }
}

fn write_checkpoint(dir: &Path, cp: &Checkpoint) -> Result<(), ApiError> {
    let path = dir.join(format!("{}.json", cp.session_id));
    let tmp = dir.join(format!("{}.json.tmp", cp.session_id));
    let text = serde_json::to_string(cp).map_err(|e| ApiError::Internal(e.to_string()))?;
    std::fs::write(&tmp, text)
        .and_then(|_| std::fs::rename(&tmp, &path))
        .map_err(|e| ApiError::Internal(format!("checkpoint {}: {e}", path.display())))
}

pub struct AppState {
    datasets: HashMap<String, Arc<MatchingTask>>,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    checkpoint_dir: Option<PathBuf>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(datasets: HashMap<String, Arc<MatchingTask>>, checkpoint_dir: Option<PathBuf>) -> Self {
        Self {
            datasets,
            sessions: RwLock::new(HashMap::new()),
            checkpoint_dir,
            next_id: AtomicU64::new(1),
        }
    }

    pub fn checkpoint_dir(&self) -> Option<&Path> {
        self.checkpoint_dir.as_deref()
    }

    pub fn get(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }

    /// Seeds a human-oracle session; its first batch is pending on return.
    pub fn create(&self, req: CreateSession) -> Result<Arc<Entry>, ApiError> {
        if req.config.oracle.mode != OracleMode::Human {
            return Err(ApiError::BadRequest("sessions served over HTTP need oracle.mode = human".into()));
        }
        let task = self
            .datasets
            .get(&req.dataset)
            .cloned()
            .ok_or_else(|| ApiError::BadRequest(format!("unknown dataset `{}`", req.dataset)))?;
        let mut session = Session::new(req.config, task)?;
        settle(&mut session)?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let entry = Arc::new(Entry::new(id.clone(), req.dataset, Utc::now(), session));
        if let Some(dir) = &self.checkpoint_dir {
            write_checkpoint(dir, &entry.checkpoint(&entry.session.lock().expect("session lock")))?;
        }
        self.sessions.write().expect("registry lock").insert(id, entry.clone());
        Ok(entry)
    }

    /// Rebuilds every checkpointed session. Returns how many were restored.
    pub fn restore(&self) -> Result<usize, ApiError> {
        let Some(dir) = &self.checkpoint_dir else {
            return Ok(0);
        };
        let read = std::fs::read_dir(dir).map_err(|e| ApiError::Internal(format!("{}: {e}", dir.display())))?;
        let mut restored = 0;
        for item in read {
            let path = item.map_err(|e| ApiError::Internal(e.to_string()))?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| ApiError::Internal(e.to_string()))?;
            let cp: Checkpoint = serde_json::from_str(&text)
                .map_err(|e| ApiError::Internal(format!("checkpoint {}: {e}", path.display())))?;
            let task = self
                .datasets
                .get(&cp.dataset)
                .cloned()
                .ok_or_else(|| ApiError::Internal(format!("checkpoint {} names unknown dataset", path.display())))?;
            let mut session = Session::replay(cp.config, task, &cp.history)?;
            if !cp.partial.is_empty() {
                session.submit(&cp.partial)?;
            }
            settle(&mut session)?;
            if let Some(n) = cp.session_id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                self.next_id.fetch_max(n + 1, Ordering::SeqCst);
            }
            let entry = Arc::new(Entry::new(cp.session_id.clone(), cp.dataset, cp.created_at, session));
            self.sessions.write().expect("registry lock").insert(cp.session_id, entry);
            restored += 1;
        }
        Ok(restored)
    }
}
