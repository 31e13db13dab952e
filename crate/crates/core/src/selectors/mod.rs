//! Example selection strategies and the two selection-time enhancements
//! (blocking dimensions and the active ensemble).

mod committee;
mod ensemble;
mod lfp_lfn;
mod margin;

pub use committee::{bootstrap_committee, committee_select, forest_qbc_select, qbc_select, variance};
pub use ensemble::{ensemble_step, AcceptedModel, EnsembleOutcome, EnsembleState, DEFAULT_TAU};
pub use lfp_lfn::{agg_score, lfp_lfn_select};
pub use margin::{blocked_margin_select, margin_select, BlockingDims, MarginModel};

use std::time::Duration;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::learners::LearnerKind;
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Why a pair was picked by the LFP/LFN selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Lfp,
    Lfn,
}

/// Strategy-specific annotations attached to a selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionAux {
    /// LFP/LFN tag per chosen pair, in `chosen` order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<Tag>,
    /// Pairs skipped by blocking dimensions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<usize>,
    /// Full margin (dot product) evaluations performed.
    pub dot_products: usize,
    /// Set when fewer than `batch` pairs could be returned although the pool
    /// was large enough.
    #[serde(default)]
    pub short_batch: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    #[serde(with = "crate::timing")]
    pub committee_creation_time: Duration,
    #[serde(with = "crate::timing")]
    pub scoring_time: Duration,
    pub aux: SelectionAux,
}

impl SelectionResult {
    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Random,
    /// Learner-agnostic query-by-committee over bootstrap models.
    Qbc,
    /// The trees of the current forest as committee.
    ForestQbc,
    Margin,
    LfpLfn,
}

impl std::fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectorKind::Random => "random",
            SelectorKind::Qbc => "qbc",
            SelectorKind::ForestQbc => "forest_qbc",
            SelectorKind::Margin => "margin",
            SelectorKind::LfpLfn => "lfp_lfn",
        })
    }
}

impl SelectorKind {
    pub fn supports(self, learner: LearnerKind) -> bool {
        match self {
            SelectorKind::Random | SelectorKind::Qbc => true,
            SelectorKind::ForestQbc => learner == LearnerKind::Forest,
            SelectorKind::Margin => matches!(learner, LearnerKind::Linear | LearnerKind::Mlp),
            SelectorKind::LfpLfn => learner == LearnerKind::Rules,
        }
    }

    pub fn check(self, learner: LearnerKind) -> Result<()> {
        if self.supports(learner) {
            Ok(())
        } else {
            Err(Error::Incompatible(format!("selector {self} cannot drive the {learner} learner")))
        }
    }
}

/// Uniform random batch, the baseline every strategy is compared against.
pub fn random_select(pool: &[usize], batch: usize, rng: &mut StreamRng) -> SelectionResult {
    let mut chosen: Vec<usize> = pool.choose_multiple(rng, batch.min(pool.len())).copied().collect();
    chosen.sort_unstable();
    SelectionResult {
        chosen,
        ..SelectionResult::default()
    }
}
