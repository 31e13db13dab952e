use serde::{Deserialize, Serialize};

use crate::corpus::SplitSpec;
use crate::learners::{LearnerConfig, LearnerKind};
use crate::oracle::{OracleConfig, OracleMode};
use crate::selectors::SelectorKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Termination {
    /// Stop once F1 reaches this value. Only honoured with a perfect oracle.
    pub f1_target: Option<f64>,
    /// Stop once this many labels have been used.
    pub label_budget: Option<usize>,
    pub max_iterations: Option<usize>,
}

impl Default for Termination {
    fn default() -> Self {
        Self {
            f1_target: Some(0.99),
            label_budget: None,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Display name; defaults to `<selector>-<learner>`.
    #[serde(default)]
    pub name: Option<String>,
    pub learner: LearnerConfig,
    pub selector: SelectorKind,
    #[serde(default = "default_committee")]
    pub committee_size: usize,
    #[serde(default = "default_seed_size")]
    pub seed_size: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "OracleConfig::perfect")]
    pub oracle: OracleConfig,
    /// Top-K blocking dimensions for margin selection with a linear model.
    #[serde(default)]
    pub blocking_k: Option<usize>,
    /// Precision gate of the active ensemble; `None` disables it.
    #[serde(default)]
    pub ensemble_tau: Option<f64>,
    #[serde(default)]
    pub termination: Termination,
    /// With a human oracle, answer the seed from gold instead of asking.
    #[serde(default)]
    pub seed_from_gold: bool,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_committee() -> usize {
    20
}

fn default_seed_size() -> usize {
    30
}

fn default_batch() -> usize {
    10
}

impl SessionConfig {
    pub fn new(learner: LearnerConfig, selector: SelectorKind) -> Self {
        Self {
            name: None,
            learner,
            selector,
            committee_size: default_committee(),
            seed_size: default_seed_size(),
            batch_size: default_batch(),
            split: SplitSpec::default(),
            oracle: OracleConfig::perfect(),
            blocking_k: None,
            ensemble_tau: None,
            termination: Termination::default(),
            seed_from_gold: false,
            master_seed: 0,
        }
    }

    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.selector, self.learner.kind()))
    }

    pub fn validate(&self) -> Result<()> {
        self.selector.check(self.learner.kind())?;
        self.oracle.validate()?;
        if self.seed_size < 2 {
            return Err(Error::invalid("seed_size must be at least 2"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.selector == SelectorKind::Qbc && self.committee_size < 2 {
            return Err(Error::invalid("committee_size must be at least 2"));
        }
        if let Some(k) = self.blocking_k {
            if k == 0 {
                return Err(Error::invalid("blocking_k must be at least 1"));
            }
            if self.selector != SelectorKind::Margin || self.learner.kind() != LearnerKind::Linear {
                return Err(Error::Incompatible(
                    "blocking dimensions need margin selection with the linear learner".into(),
                ));
            }
        }
        if let Some(tau) = self.ensemble_tau {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::invalid(format!("ensemble_tau {tau} outside [0, 1]")));
            }
        }
        if self.seed_from_gold && self.oracle.mode != OracleMode::Human {
            return Err(Error::invalid("seed_from_gold only applies to the human oracle"));
        }
        if let LearnerConfig::Forest(p) = &self.learner {
            if p.n_trees == 0 {
                return Err(Error::invalid("n_trees must be at least 1"));
            }
        }
        Ok(())
    }
}
