//! Active ensemble: a precision gate that freezes high-precision models and
//! takes their predicted matches out of play.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::features::FeatureSource;
use crate::learners::{Classifier, Model};
use crate::{Error, Label, Result};

pub const DEFAULT_TAU: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedModel {
    pub model: Model,
    /// Precision on the selected batch when the model was accepted.
    pub precision: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub accepted: Vec<AcceptedModel>,
    pub covered_positive_ids: BTreeSet<usize>,
    pub tau: f64,
}

impl EnsembleState {
    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::invalid(format!("ensemble tau {tau} outside [0, 1]")));
        }
        Ok(Self {
            accepted: Vec::new(),
            covered_positive_ids: BTreeSet::new(),
            tau,
        })
    }

    /// Union of the accepted models' positive predictions.
    pub fn predict(&self, x: &[f64]) -> Label {
        self.accepted.iter().any(|a| a.model.predict_unchecked(x) == 1) as Label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EnsembleOutcome {
    Accepted {
        precision: f64,
        removed_labeled: Vec<usize>,
        removed_pool: Vec<usize>,
    },
    /// `precision` is absent when the candidate predicted no match in the batch.
    Rejected { precision: Option<f64> },
}

/// Scores `candidate` on the freshly labeled `selected` batch. At precision
/// ≥ τ the model joins the ensemble and every labeled or pool pair it
/// predicts as a match is removed and recorded as covered.
pub fn ensemble_step<F: FeatureSource + ?Sized>(
    state: &mut EnsembleState,
    candidate: &Model,
    iteration: usize,
    selected: &[(usize, Label)],
    labeled: &mut Vec<(usize, Label)>,
    pool: &mut Vec<usize>,
    features: &F,
) -> Result<EnsembleOutcome> {
    if candidate.dim() != features.dim() {
        return Err(Error::DimensionMismatch {
            expected: candidate.dim(),
            actual: features.dim(),
        });
    }
    let predicts = |id: usize| candidate.predict_unchecked(&features.vector(id)) == 1;
    let (mut predicted, mut correct) = (0usize, 0usize);
    for &(id, label) in selected {
        if predicts(id) {
            predicted += 1;
            correct += (label == 1) as usize;
        }
    }
    if predicted == 0 {
        return Ok(EnsembleOutcome::Rejected { precision: None });
    }
    let precision = correct as f64 / predicted as f64;
    if precision < state.tau {
        return Ok(EnsembleOutcome::Rejected {
            precision: Some(precision),
        });
    }
    let mut removed_labeled = Vec::new();
    labeled.retain(|&(id, _)| {
        let hit = predicts(id);
        if hit {
            removed_labeled.push(id);
        }
        !hit
    });
    let mut removed_pool = Vec::new();
    pool.retain(|&id| {
        let hit = predicts(id);
        if hit {
            removed_pool.push(id);
        }
        !hit
    });
    state.covered_positive_ids.extend(removed_labeled.iter().chain(&removed_pool));
    state.accepted.push(AcceptedModel {
        model: candidate.clone(),
        precision,
        iteration,
    });
    Ok(EnsembleOutcome::Accepted {
        precision,
        removed_labeled,
        removed_pool,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;
    use crate::learners::LinearModel;

    /// Pairs 0..20 with feature x = id / 20; the candidate predicts x ≥ 0.5.
    fn setup() -> (FeatureMatrix, Model) {
        let features = FeatureMatrix::from_rows(1, (0..20).map(|i| vec![i as f64 / 20.0])).unwrap();
        (features, Model::Linear(LinearModel::new(vec![1.0], -0.5)))
    }

    #[test]
    fn precision_at_gate_is_accepted_and_positives_leave_both_pools() {
        let (features, model) = setup();
        let mut state = EnsembleState::new(DEFAULT_TAU).unwrap();
        // 10 predicted matches in the batch, 9 correct
        let selected: Vec<(usize, Label)> = (10..20).map(|id| (id, (id != 10) as Label)).collect();
        let mut labeled: Vec<(usize, Label)> = selected.clone();
        labeled.extend([(0, 0), (1, 0)]);
        let mut pool: Vec<usize> = (2..10).collect();
        let out = ensemble_step(&mut state, &model, 1, &selected, &mut labeled, &mut pool, &features).unwrap();
        match out {
            EnsembleOutcome::Accepted { precision, .. } => assert!((precision - 0.9).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(labeled, vec![(0, 0), (1, 0)]);
        assert_eq!(pool, (2..10).collect::<Vec<_>>());
        assert_eq!(state.covered_positive_ids, (10..20).collect());
        assert_eq!(state.predict(&[0.7]), 1);
    }

    #[test]
    fn low_precision_is_rejected_without_changes() {
        let (features, model) = setup();
        let mut state = EnsembleState::new(DEFAULT_TAU).unwrap();
        let selected: Vec<(usize, Label)> = (10..20).map(|id| (id, (id % 2) as Label)).collect();
        let mut labeled = selected.clone();
        let mut pool: Vec<usize> = (0..10).collect();
        let out = ensemble_step(&mut state, &model, 1, &selected, &mut labeled, &mut pool, &features).unwrap();
        assert_eq!(out, EnsembleOutcome::Rejected { precision: Some(0.5) });
        assert_eq!(labeled, selected);
        assert_eq!(pool.len(), 10);
        assert!(state.accepted.is_empty() && state.covered_positive_ids.is_empty());
    }

    #[test]
    fn no_predicted_match_is_rejected() {
        let (features, model) = setup();
        let mut state = EnsembleState::new(DEFAULT_TAU).unwrap();
        let selected: Vec<(usize, Label)> = (0..10).map(|id| (id, 1)).collect();
        let out =
            ensemble_step(&mut state, &model, 1, &selected, &mut selected.clone(), &mut vec![], &features).unwrap();
        assert_eq!(out, EnsembleOutcome::Rejected { precision: None });
    }

    #[test]
    fn ensemble_recall_dominates_members() {
        let features = FeatureMatrix::from_rows(2, (0..40).map(|i| vec![(i % 7) as f64 / 7.0, (i % 5) as f64 / 5.0]))
            .unwrap();
        let a = Model::Linear(LinearModel::new(vec![1.0, 0.0], -0.6));
        let b = Model::Linear(LinearModel::new(vec![0.0, 1.0], -0.7));
        let mut state = EnsembleState::new(0.0).unwrap();
        for m in [&a, &b] {
            state.accepted.push(AcceptedModel {
                model: m.clone(),
                precision: 1.0,
                iteration: 0,
            });
        }
        for x in features.rows() {
            assert!(state.predict(x) >= a.predict_unchecked(x));
            assert!(state.predict(x) >= b.predict_unchecked(x));
        }
    }
}
