//! JSON bodies of the labeling API.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use emal::session::{IterationLog, SessionConfig, TerminationReason};
use emal::Label;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    /// Name of a dataset the server has loaded.
    pub dataset: String,
    /// Must use the human oracle.
    pub config: SessionConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingLabels,
    /// A completed batch is being absorbed; poll the state.
    Training,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub dataset: String,
    pub status: Status,
    /// Iteration the pending batch belongs to, or the last one once terminated.
    pub iteration: usize,
    pub labels_used: usize,
    pub label_budget: Option<usize>,
    /// Unanswered pair ids of the pending batch.
    pub remaining: Vec<usize>,
    pub termination: Option<TerminationReason>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub pair_id: usize,
    pub left_values: Vec<Option<String>>,
    pub right_values: Vec<Option<String>>,
    pub attributes: Vec<String>,
    /// Mean of the attribute's similarity features.
    pub similarities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingBatch {
    pub session_id: String,
    pub iteration: usize,
    pub items: Vec<BatchItem>,
    pub answered: BTreeMap<usize, Label>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub labels: BTreeMap<usize, Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub state: SessionState,
    /// Whether the submission completed the batch and the session moved on.
    pub advanced: bool,
    pub batch: Option<PendingBatch>,
    /// The iteration the completed batch produced.
    pub log: Option<IterationLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub session_id: String,
    pub iterations: Vec<IterationLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub iteration: usize,
    pub precision: f64,
    pub n_atoms: Option<usize>,
    pub rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub session_id: String,
    /// Iteration of the last trained model; 0 before the first.
    pub iteration: usize,
    pub learner: String,
    pub trained: bool,
    pub n_atoms: Option<usize>,
    pub depth: Option<usize>,
    /// One DNF conjunct per entry, for rule and tree models.
    pub rules: Vec<String>,
    pub ensemble: Vec<EnsembleMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    /// For label conflicts: the pair and the answer that stands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub existing: Option<Label>,
}
