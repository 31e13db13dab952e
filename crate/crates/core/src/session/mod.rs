//! The active-learning loop: seed, select, ask, retrain, evaluate, stop.
//!
//! A session always has at most one pending batch. Automatic oracles answer
//! it directly ([`Session::step`]); a human answers it through
//! [`Session::submit`], and the session advances once the batch is complete.

mod config;
mod log;

pub use config::{SessionConfig, Termination};
pub use log::{read_log, strip_timing, write_log, IterationLog};

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::split;
use crate::evaluator::{count_atoms, forest_depth, prf1, Metrics};
use crate::features::{FeatureMatrix, FeatureSource};
use crate::learners::{
    class_counts, learn_rule, Classifier, ConjunctiveRule, LabeledExample, LearnerConfig, Model,
};
use crate::oracle::{Answer, Oracle, OracleMode};
use crate::selectors::{
    blocked_margin_select, ensemble_step, forest_qbc_select, lfp_lfn_select, margin_select,
    qbc_select, random_select, EnsembleOutcome, EnsembleState, SelectionResult, SelectorKind,
};
use crate::{rng, Error, Label, MatchingTask, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    F1Target,
    PoolExhausted,
    LabelBudget,
    SelectorExhausted,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    Seed,
    /// Extra random pairs drawn because the seed answers held one class.
    SeedExtension,
    Selected,
}

/// The batch waiting for labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    /// Iteration whose log row the batch will produce.
    pub iteration: usize,
    pub kind: BatchKind,
    pub pair_ids: Vec<usize>,
    pub selection: SelectionResult,
}

/// One selection, as appended to the run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub iteration: usize,
    pub strategy: SelectorKind,
    pub selection: SelectionResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleOutcome>,
}

pub struct Session {
    config: SessionConfig,
    task: Arc<MatchingTask>,
    test: Vec<usize>,
    pool: Vec<usize>,
    labeled: Vec<(usize, Label)>,
    /// Every answer consumed, in order; survives ensemble pruning.
    history: Vec<(usize, Label)>,
    oracle: Oracle,
    model: Option<Model>,
    ensemble: Option<EnsembleState>,
    pending: Option<Pending>,
    logs: Vec<IterationLog>,
    trace: Vec<SelectionTrace>,
    terminated: Option<TerminationReason>,
    seed_rng: rng::StreamRng,
}

fn remove_ids(pool: &mut Vec<usize>, ids: &[usize]) {
    let drop: BTreeSet<usize> = ids.iter().copied().collect();
    pool.retain(|id| !drop.contains(id));
}

impl Session {
    /// Splits the task, draws the seed and leaves it pending.
    pub fn new(config: SessionConfig, task: Arc<MatchingTask>) -> Result<Self> {
        config.validate()?;
        let split = split(&task.pairs, &config.split, rng::stream_seed(config.master_seed, "split"))?;
        if split.pool.len() < config.seed_size {
            return Err(Error::invalid(format!(
                "pool of {} pairs is smaller than the seed of {}",
                split.pool.len(),
                config.seed_size
            )));
        }
        let oracle = Oracle::new(config.oracle, task.gold_labels(), config.master_seed)?;
        let ensemble = config.ensemble_tau.map(EnsembleState::new).transpose()?;
        let mut s = Self {
            test: split.test,
            pool: split.pool,
            labeled: Vec::new(),
            history: Vec::new(),
            oracle,
            model: None,
            ensemble,
            pending: None,
            logs: Vec::new(),
            trace: Vec::new(),
            terminated: None,
            seed_rng: rng::stream(config.master_seed, "seed"),
            config,
            task,
        };
        let seed = s.draw_seed();
        s.pending = Some(Pending {
            iteration: 0,
            kind: BatchKind::Seed,
            pair_ids: seed,
            selection: SelectionResult::default(),
        });
        if s.config.seed_from_gold {
            s.answer_from_gold()?;
        }
        Ok(s)
    }

    /// Uniform draw; if it holds a single gold class, a stratified redraw
    /// with one pair of each class plus uniform filler.
    fn draw_seed(&mut self) -> Vec<usize> {
        let n = self.config.seed_size;
        let mut seed: Vec<usize> = self.pool.choose_multiple(&mut self.seed_rng, n).copied().collect();
        let gold = |id: &usize| self.task.pairs[*id].gold_label;
        let positives = seed.iter().filter(|id| gold(id) == Some(1)).count();
        if positives == 0 || positives == seed.len() {
            let pos: Vec<usize> = self.pool.iter().copied().filter(|id| gold(id) == Some(1)).collect();
            let neg: Vec<usize> = self.pool.iter().copied().filter(|id| gold(id) == Some(0)).collect();
            if let (Some(&p), Some(&q)) = (pos.choose(&mut self.seed_rng), neg.choose(&mut self.seed_rng)) {
                let rest: Vec<usize> = self.pool.iter().copied().filter(|&id| id != p && id != q).collect();
                seed = vec![p, q];
                seed.extend(rest.choose_multiple(&mut self.seed_rng, n - 2).copied());
            }
        }
        seed.sort_unstable();
        seed
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn task(&self) -> &Arc<MatchingTask> {
        &self.task
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    /// Pending pairs that have no answer yet.
    pub fn unanswered(&self) -> Vec<usize> {
        self.pending
            .as_ref()
            .map(|p| p.pair_ids.iter().copied().filter(|&id| self.oracle.answer(id).is_none()).collect())
            .unwrap_or_default()
    }

    pub fn answer(&self, pair_id: usize) -> Option<Label> {
        self.oracle.answer(pair_id)
    }

    pub fn logs(&self) -> &[IterationLog] {
        &self.logs
    }

    pub fn trace(&self) -> &[SelectionTrace] {
        &self.trace
    }

    pub fn model(&self) -> Option<&Model> {
        self.model.as_ref()
    }

    pub fn ensemble(&self) -> Option<&EnsembleState> {
        self.ensemble.as_ref()
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn labeled(&self) -> &[(usize, Label)] {
        &self.labeled
    }

    pub fn test_set(&self) -> &[usize] {
        &self.test
    }

    /// Answers consumed so far, in the order they were absorbed.
    pub fn history(&self) -> &[(usize, Label)] {
        &self.history
    }

    pub fn labels_used(&self) -> usize {
        self.history.len()
    }

    pub fn terminated(&self) -> Option<TerminationReason> {
        self.terminated
    }

    fn answer_from_gold(&mut self) -> Result<()> {
        for id in self.unanswered() {
            let gold = self.task.pairs[id]
                .gold_label
                .ok_or_else(|| Error::invalid(format!("pair {id} has no gold label")))?;
            self.oracle.provide(id, gold)?;
        }
        Ok(())
    }

    /// Records human answers for the pending batch. The request is applied
    /// all-or-nothing: an id outside the batch, an invalid label or a
    /// conflict with an earlier answer rejects it. Advances the session when
    /// the batch becomes complete and returns whether it did.
    pub fn submit(&mut self, labels: &[(usize, Label)]) -> Result<bool> {
        let pending = self.pending.as_ref().ok_or_else(|| Error::Session("no batch is pending".into()))?;
        let members: BTreeSet<usize> = pending.pair_ids.iter().copied().collect();
        let mut seen = std::collections::BTreeMap::new();
        for &(id, label) in labels {
            if !members.contains(&id) {
                return Err(Error::UnknownPair(id));
            }
            self.oracle.check_answer(id, label)?;
            if let Some(&prev) = seen.get(&id) {
                if prev != label {
                    return Err(Error::LabelConflict {
                        pair_id: id,
                        existing: prev,
                        submitted: label,
                    });
                }
            }
            seen.insert(id, label);
        }
        for (id, label) in seen {
            self.oracle.provide(id, label)?;
        }
        if self.unanswered().is_empty() {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Answers the pending batch from the configured oracle and advances.
    /// Fails in human mode while answers are missing.
    pub fn step(&mut self) -> Result<()> {
        if self.pending.is_none() {
            return Err(Error::Session("session has terminated".into()));
        }
        for id in self.unanswered() {
            if let Answer::Pending = self.oracle.ask(id)? {
                return Err(Error::Session(format!("pair {id} is waiting for a human answer")));
            }
        }
        self.advance()
    }

    /// Steps until termination.
    pub fn run(&mut self) -> Result<TerminationReason> {
        while self.terminated.is_none() {
            self.step()?;
        }
        Ok(self.terminated.expect("loop exits on termination"))
    }

    fn advance(&mut self) -> Result<()> {
        let pending = self.pending.take().ok_or_else(|| Error::Session("no batch is pending".into()))?;
        let batch: Vec<(usize, Label)> = pending
            .pair_ids
            .iter()
            .map(|&id| (id, self.oracle.answer(id).expect("batch is complete")))
            .collect();
        remove_ids(&mut self.pool, &pending.pair_ids);
        self.history.extend(&batch);

        let mut ensemble_outcome = None;
        if pending.kind == BatchKind::Selected {
            if let (Some(state), Some(candidate)) = (self.ensemble.as_mut(), self.model.as_ref()) {
                self.labeled.extend(&batch);
                let out = ensemble_step(
                    state,
                    candidate,
                    pending.iteration,
                    &batch,
                    &mut self.labeled,
                    &mut self.pool,
                    &self.task.features,
                )?;
                ensemble_outcome = Some(out);
            } else {
                self.labeled.extend(&batch);
            }
            self.trace.push(SelectionTrace {
                iteration: pending.iteration,
                strategy: self.config.selector,
                selection: pending.selection.clone(),
                ensemble: ensemble_outcome,
            });
        } else {
            self.labeled.extend(&batch);
            let labels: Vec<LabeledExample<'_>> = self.examples();
            let (p, n) = class_counts(&labels);
            if p == 0 || n == 0 {
                return self.extend_seed(pending.iteration);
            }
        }

        let started = Instant::now();
        self.retrain(pending.iteration)?;
        let train_time = started.elapsed();
        let metrics = self.evaluate()?;
        self.log_iteration(pending.iteration, train_time, &pending.selection, metrics);

        if let Some(reason) = self.should_terminate(metrics) {
            self.terminated = Some(reason);
            return Ok(());
        }
        let iteration = pending.iteration + 1;
        let selection = self.select(iteration)?;
        if selection.is_empty() {
            self.terminated = Some(TerminationReason::SelectorExhausted);
            return Ok(());
        }
        self.pending = Some(Pending {
            iteration,
            kind: BatchKind::Selected,
            pair_ids: selection.chosen.clone(),
            selection,
        });
        Ok(())
    }

    fn extend_seed(&mut self, iteration: usize) -> Result<()> {
        if self.pool.is_empty() {
            let (positives, negatives) = class_counts(&self.examples());
            return Err(Error::SingleClass { positives, negatives });
        }
        let mut extra: Vec<usize> =
            self.pool.choose_multiple(&mut self.seed_rng, self.config.batch_size).copied().collect();
        extra.sort_unstable();
        self.pending = Some(Pending {
            iteration,
            kind: BatchKind::SeedExtension,
            pair_ids: extra,
            selection: SelectionResult::default(),
        });
        if self.config.seed_from_gold {
            self.answer_from_gold()?;
        }
        Ok(())
    }

    fn examples(&self) -> Vec<LabeledExample<'_>> {
        self.labeled
            .iter()
            .map(|&(pair_id, label)| LabeledExample {
                pair_id,
                features: self.task.features.row(pair_id),
                label,
            })
            .collect()
    }

    /// Retrains from scratch on the cumulative labeled set. A single-class
    /// set (possible after ensemble pruning) yields a constant model.
    fn retrain(&mut self, iteration: usize) -> Result<()> {
        let examples = self.examples();
        let seed = rng::child_seed(rng::stream_seed(self.config.master_seed, "train"), iteration as u64);
        let dim = self.task.features.dim();
        let n_attr = self.task.n_attributes();
        let model = match class_counts(&examples) {
            (p, n) if p > 0 && n > 0 => self.config.learner.train(&examples, n_attr, seed)?,
            (p, _) => Model::constant(&self.config.learner, dim, n_attr, (p > 0) as Label),
        };
        self.model = Some(model);
        Ok(())
    }

    /// Current predictions for every pair: the model, united with the
    /// accepted ensemble members.
    pub fn predictions(&self) -> Vec<Label> {
        let Some(model) = &self.model else {
            return vec![0; self.task.len()];
        };
        let ensemble = self.ensemble.as_ref();
        self.task
            .features
            .rows()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|x| model.predict_unchecked(x) | ensemble.map_or(0, |e| e.predict(x)))
            .collect()
    }

    /// Metrics on the evaluation set: every pair in progressive mode, the
    /// held-out pairs otherwise.
    pub fn evaluate(&self) -> Result<Metrics> {
        prf1(&self.predictions(), &self.task.gold_labels(), &self.test)
    }

    fn log_iteration(&mut self, iteration: usize, train_time: Duration, sel: &SelectionResult, m: Metrics) {
        let model = self.model.as_ref().expect("model trained before logging");
        let depth = match model {
            Model::Forest(f) => Some(forest_depth(f)),
            _ => None,
        };
        self.logs.push(IterationLog {
            iteration,
            labels_used: self.labels_used(),
            labeled: self.labeled.len(),
            pool: self.pool.len(),
            covered: self.ensemble.as_ref().map_or(0, |e| e.covered_positive_ids.len()),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            train_time,
            committee_creation_time: sel.committee_creation_time,
            scoring_time: sel.scoring_time,
            user_wait_time: train_time + sel.committee_creation_time + sel.scoring_time,
            n_atoms: count_atoms(model),
            depth,
            ensemble_size: self.ensemble.as_ref().map(|e| e.accepted.len()),
            dot_products: sel.aux.dot_products,
            skipped: sel.aux.skipped.len(),
        });
    }

    fn should_terminate(&self, m: Metrics) -> Option<TerminationReason> {
        let t = &self.config.termination;
        if self.config.oracle.mode == OracleMode::Perfect && t.f1_target.is_some_and(|target| m.f1 >= target) {
            return Some(TerminationReason::F1Target);
        }
        if self.pool.is_empty() {
            return Some(TerminationReason::PoolExhausted);
        }
        if t.label_budget.is_some_and(|b| self.labels_used() >= b) {
            return Some(TerminationReason::LabelBudget);
        }
        let iteration = self.logs.last().map_or(0, |l| l.iteration);
        if t.max_iterations.is_some_and(|max| iteration >= max) {
            return Some(TerminationReason::MaxIterations);
        }
        None
    }

    fn select(&mut self, iteration: usize) -> Result<SelectionResult> {
        let mut batch = self.config.batch_size;
        if let Some(budget) = self.config.termination.label_budget {
            batch = batch.min(budget.saturating_sub(self.labels_used()));
        }
        let seed = rng::child_seed(rng::stream_seed(self.config.master_seed, "select"), iteration as u64);
        let features: &FeatureMatrix = &self.task.features;
        let model = self.model.as_ref().expect("model trained before selection");
        let examples = self.examples();
        let (p, n) = class_counts(&examples);
        let single_class = p == 0 || n == 0;
        match self.config.selector {
            SelectorKind::Random => Ok(random_select(&self.pool, batch, &mut rng::from_seed(seed))),
            SelectorKind::Qbc if single_class => Ok(random_select(&self.pool, batch, &mut rng::from_seed(seed))),
            SelectorKind::Qbc => qbc_select(
                &self.config.learner,
                self.task.n_attributes(),
                &examples,
                features,
                &self.pool,
                self.config.committee_size,
                batch,
                seed,
            ),
            SelectorKind::ForestQbc => match model {
                Model::Forest(f) => forest_qbc_select(f, features, &self.pool, batch, seed),
                _ => unreachable!("validated selector/learner pair"),
            },
            SelectorKind::Margin => match (model, self.config.blocking_k) {
                (Model::Linear(m), Some(k)) => blocked_margin_select(m, features, &self.pool, batch, k),
                _ => {
                    let m = model.as_margin_model().expect("validated selector/learner pair");
                    margin_select(m, features, &self.pool, batch)
                }
            },
            SelectorKind::LfpLfn => {
                let Model::Dnf(dnf) = model else {
                    unreachable!("validated selector/learner pair")
                };
                let candidate = self.candidate_rule(dnf, &examples)?;
                lfp_lfn_select(dnf, &candidate, features, &self.pool, batch)
            }
        }
    }

    /// The rule the LFP/LFN selector probes: a fresh rule for the positives
    /// the DNF misses, or, when it misses none, its least precise rule.
    fn candidate_rule(
        &self,
        dnf: &crate::learners::DnfModel,
        examples: &[LabeledExample<'_>],
    ) -> Result<ConjunctiveRule> {
        let LearnerConfig::Rules(params) = &self.config.learner else {
            unreachable!("validated selector/learner pair")
        };
        let residual: Vec<LabeledExample<'_>> = examples
            .iter()
            .copied()
            .filter(|e| e.label == 0 || dnf.predict_unchecked(e.features) == 0)
            .collect();
        if residual.iter().any(|e| e.label == 1) {
            return learn_rule(&residual, &dnf.space, params.constraints());
        }
        Ok(dnf
            .rules
            .iter()
            .min_by(|a, b| a.precision.total_cmp(&b.precision))
            .cloned()
            .unwrap_or_else(|| ConjunctiveRule::new(vec![])))
    }

    /// Rebuilds a session by replaying answers in order. Used to restore a
    /// checkpoint: configuration plus label history determine the state.
    pub fn replay(config: SessionConfig, task: Arc<MatchingTask>, history: &[(usize, Label)]) -> Result<Self> {
        let mut s = Self::new(config, task)?;
        let answers: std::collections::BTreeMap<usize, Label> = history.iter().copied().collect();
        while s.history.len() < history.len() {
            let Some(pending) = s.pending.as_ref() else {
                return Err(Error::Session("checkpoint continues past termination".into()));
            };
            let mut batch = Vec::new();
            for &id in &pending.pair_ids {
                let label = *answers
                    .get(&id)
                    .ok_or_else(|| Error::Session(format!("checkpoint has no answer for pair {id}")))?;
                batch.push((id, label));
            }
            if !s.submit(&batch)? {
                return Err(Error::Session("replayed batch did not complete".into()));
            }
        }
        Ok(s)
    }
}

/// Logs of `runs` sessions that differ only in master seed.
pub fn run_repeated(config: &SessionConfig, task: &Arc<MatchingTask>, runs: usize) -> Result<Vec<Vec<IterationLog>>> {
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut cfg = config.clone();
            cfg.master_seed = rng::child_seed(config.master_seed, r as u64);
            let mut s = Session::new(cfg, task.clone())?;
            s.run()?;
            Ok(s.logs.clone())
        })
        .collect()
}

/// Mean F1 per iteration over runs, truncated to the shortest run.
pub fn mean_f1(runs: &[Vec<IterationLog>]) -> Vec<(usize, f64)> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let labels = runs[0][i].labels_used;
            let f1 = runs.iter().map(|r| r[i].f1).sum::<f64>() / runs.len() as f64;
            (labels, f1)
        })
        .collect()
}
