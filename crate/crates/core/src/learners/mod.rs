//! The four learner families and a common [`Model`] wrapper.

mod linear;
mod mlp;
mod rules;
mod tree;

pub use linear::{hinge_objective, linear_margin, train_linear, LinearModel, LinearParams};
pub use mlp::{mlp_margin, train_mlp, BatchNormMode, MlpGradients, MlpModel, MlpParams};
pub use rules::{
    dnf_predict, learn_rule, rule_minus, train_dnf, ConjunctiveRule, DnfModel, RuleConstraints, RuleParams,
};
pub use tree::{forest_votes, train_forest, DecisionTree, ForestModel, ForestParams, Node};

use serde::{Deserialize, Serialize};

use crate::features::AtomSpace;
use crate::{Error, Label, Result};

/// One oracle-labeled pair as seen by a trainer.
#[derive(Debug, Clone, Copy)]
pub struct LabeledExample<'a> {
    pub pair_id: usize,
    pub features: &'a [f64],
    pub label: Label,
}

/// `(positives, negatives)`.
pub fn class_counts(examples: &[LabeledExample<'_>]) -> (usize, usize) {
    let positives = examples.iter().filter(|e| e.label == 1).count();
    (positives, examples.len() - positives)
}

pub(crate) fn require_both_classes(examples: &[LabeledExample<'_>]) -> Result<()> {
    match class_counts(examples) {
        (p, n) if p > 0 && n > 0 => Ok(()),
        (positives, negatives) => Err(Error::SingleClass { positives, negatives }),
    }
}

pub(crate) fn require_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Linear,
    Forest,
    Mlp,
    Rules,
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LearnerKind::Linear => "linear",
            LearnerKind::Forest => "forest",
            LearnerKind::Mlp => "mlp",
            LearnerKind::Rules => "rules",
        })
    }
}

/// A learner family together with its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    Linear(LinearParams),
    Forest(ForestParams),
    Mlp(MlpParams),
    Rules(RuleParams),
}

impl LearnerConfig {
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Linear => LearnerConfig::Linear(LinearParams::default()),
            LearnerKind::Forest => LearnerConfig::Forest(ForestParams::default()),
            LearnerKind::Mlp => LearnerConfig::Mlp(MlpParams::default()),
            LearnerKind::Rules => LearnerConfig::Rules(RuleParams::default()),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerConfig::Linear(_) => LearnerKind::Linear,
            LearnerConfig::Forest(_) => LearnerKind::Forest,
            LearnerConfig::Mlp(_) => LearnerKind::Mlp,
            LearnerConfig::Rules(_) => LearnerKind::Rules,
        }
    }

    /// Trains a fresh model. `n_attributes` sizes the rule atom space.
    pub fn train(&self, examples: &[LabeledExample<'_>], n_attributes: usize, seed: u64) -> Result<Model> {
        Ok(match self {
            LearnerConfig::Linear(p) => Model::Linear(train_linear(examples, p, seed)?),
            LearnerConfig::Forest(p) => Model::Forest(train_forest(examples, p.n_trees, seed)?),
            LearnerConfig::Mlp(p) => Model::Mlp(train_mlp(examples, p, seed)?),
            LearnerConfig::Rules(p) => Model::Dnf(train_dnf(examples, AtomSpace::new(n_attributes), p)?),
        })
    }
}

/// Anything that labels a numeric feature vector.
pub trait Classifier {
    /// Expected input dimension.
    fn dim(&self) -> usize;
    /// Predicts without a dimension check; callers validate once per batch.
    fn predict_unchecked(&self, x: &[f64]) -> Label;

    fn predict(&self, x: &[f64]) -> Result<Label> {
        require_dim(self.dim(), x)?;
        Ok(self.predict_unchecked(x))
    }
}

/// A trained model of any family. Serializes to self-describing JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Forest(ForestModel),
    Mlp(MlpModel),
    Dnf(DnfModel),
}

impl Model {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Model::Linear(_) => LearnerKind::Linear,
            Model::Forest(_) => LearnerKind::Forest,
            Model::Mlp(_) => LearnerKind::Mlp,
            Model::Dnf(_) => LearnerKind::Rules,
        }
    }

    /// A model of the given family that predicts `label` everywhere. Used
    /// when the labeled set holds a single class and nothing can be trained.
    pub fn constant(config: &LearnerConfig, dim: usize, n_attributes: usize, label: Label) -> Self {
        match config {
            LearnerConfig::Linear(_) => Model::Linear(LinearModel::constant(dim, label)),
            LearnerConfig::Forest(p) => Model::Forest(ForestModel {
                dim,
                split_feature_count: ForestModel::split_feature_count(dim),
                trees: vec![DecisionTree::leaf(dim, label); p.n_trees.max(1)],
            }),
            LearnerConfig::Mlp(_) => Model::Mlp(MlpModel::constant(dim, label)),
            LearnerConfig::Rules(_) => {
                let rules = if label == 1 { vec![ConjunctiveRule::new(vec![])] } else { vec![] };
                Model::Dnf(DnfModel::new(AtomSpace::new(n_attributes), rules))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Classifier for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Forest(m) => m.dim(),
            Model::Mlp(m) => m.dim(),
            Model::Dnf(m) => m.dim(),
        }
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        match self {
            Model::Linear(m) => m.predict_unchecked(x),
            Model::Forest(m) => m.predict_unchecked(x),
            Model::Mlp(m) => m.predict_unchecked(x),
            Model::Dnf(m) => m.predict_unchecked(x),
        }
    }
}
