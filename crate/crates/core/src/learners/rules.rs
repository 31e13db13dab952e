//! Monotone DNF rules over Boolean similarity atoms.

use serde::{Deserialize, Serialize};

use super::{require_dim, Classifier, LabeledExample};
use crate::features::{AtomId, AtomSpace, BooleanFeatureVector, FeatureSchema, SimilarityFunction};
use crate::{Error, Label, Result};

/// A conjunction of atoms, kept sorted. The empty rule is always true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjunctiveRule {
    pub atoms: Vec<AtomId>,
    /// Training precision when the rule was learned.
    pub precision: f64,
    /// Fraction of training positives the rule matched.
    pub coverage: f64,
}

impl ConjunctiveRule {
    pub fn new(mut atoms: Vec<AtomId>) -> Self {
        atoms.sort_unstable();
        atoms.dedup();
        Self {
            atoms,
            precision: 0.0,
            coverage: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn matches(&self, space: &AtomSpace, features: &[f64]) -> bool {
        self.atoms.iter().all(|&a| space.holds(a, features))
    }

    pub fn matches_atoms(&self, atoms: &[bool]) -> bool {
        self.atoms.iter().all(|&a| atoms[a])
    }

    pub fn describe(&self, space: &AtomSpace, schema: &FeatureSchema) -> String {
        if self.atoms.is_empty() {
            return "true".into();
        }
        let parts: Vec<String> = self.atoms.iter().map(|&a| space.describe(a, schema)).collect();
        parts.join(" ∧ ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConstraints {
    pub min_precision: f64,
    /// Minimum fraction of positives a rule must keep matching.
    pub min_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleParams {
    pub min_precision: f64,
    pub min_coverage: f64,
    pub max_rules: usize,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            min_precision: 0.9,
            min_coverage: 0.0,
            max_rules: 20,
        }
    }
}

impl RuleParams {
    pub fn constraints(&self) -> RuleConstraints {
        RuleConstraints {
            min_precision: self.min_precision,
            min_coverage: self.min_coverage,
        }
    }
}

/// Greedy growth over a precomputed atom matrix; `rows` selects the examples
/// that take part.
pub(crate) fn grow_rule(
    atoms: &[Vec<bool>],
    labels: &[Label],
    rows: &[usize],
    n_atoms: usize,
    constraints: RuleConstraints,
) -> Result<ConjunctiveRule> {
    let total_pos = rows.iter().filter(|&&i| labels[i] == 1).count();
    if total_pos == 0 {
        return Err(Error::invalid("rule learning needs at least one positive example"));
    }
    let min_pos = ((constraints.min_coverage * total_pos as f64).ceil() as usize).max(1);
    let mut matched: Vec<usize> = rows.to_vec();
    let mut chosen: Vec<AtomId> = Vec::new();
    let mut pos = total_pos;
    loop {
        let precision = pos as f64 / matched.len() as f64;
        if precision >= constraints.min_precision {
            break;
        }
        // (precision, positives, atom)
        let mut best: Option<(f64, usize, AtomId)> = None;
        for a in 0..n_atoms {
            if chosen.contains(&a) {
                continue;
            }
            let (mut n, mut p) = (0usize, 0usize);
            for &i in &matched {
                if atoms[i][a] {
                    n += 1;
                    p += (labels[i] == 1) as usize;
                }
            }
            if p < min_pos {
                continue;
            }
            let prec = p as f64 / n as f64;
            let better = match best {
                None => true,
                Some((bp, bpos, _)) => prec > bp || (prec == bp && p > bpos),
            };
            if better {
                best = Some((prec, p, a));
            }
        }
        match best {
            Some((prec, p, a)) if prec > precision => {
                chosen.push(a);
                matched.retain(|&i| atoms[i][a]);
                pos = p;
            }
            _ => break,
        }
    }
    let mut rule = ConjunctiveRule::new(chosen);
    rule.precision = pos as f64 / matched.len() as f64;
    rule.coverage = pos as f64 / total_pos as f64;
    Ok(rule)
}

fn atom_matrix(examples: &[LabeledExample<'_>], space: &AtomSpace) -> Result<(Vec<Vec<bool>>, Vec<Label>)> {
    let dim = space.n_attributes * SimilarityFunction::COUNT;
    let mut atoms = Vec::with_capacity(examples.len());
    for e in examples {
        require_dim(dim, e.features)?;
        atoms.push(space.evaluate(e.features));
    }
    Ok((atoms, examples.iter().map(|e| e.label).collect()))
}

/// Greedy precision-first rule: starting from the empty conjunction, add the
/// atom with the best precision (then coverage, then lowest id) until the
/// precision target is met or nothing improves.
pub fn learn_rule(
    examples: &[LabeledExample<'_>],
    space: &AtomSpace,
    constraints: RuleConstraints,
) -> Result<ConjunctiveRule> {
    let (atoms, labels) = atom_matrix(examples, space)?;
    let rows: Vec<usize> = (0..examples.len()).collect();
    grow_rule(&atoms, &labels, &rows, space.len(), constraints)
}

/// Relaxations of `rule`, each dropping one atom, in atom order.
pub fn rule_minus(rule: &ConjunctiveRule) -> Result<Vec<ConjunctiveRule>> {
    if rule.is_empty() {
        return Err(Error::invalid("cannot relax the empty rule"));
    }
    Ok((0..rule.len())
        .map(|skip| {
            let atoms = rule.atoms.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &a)| a).collect();
            ConjunctiveRule::new(atoms)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnfModel {
    pub space: AtomSpace,
    pub rules: Vec<ConjunctiveRule>,
}

impl DnfModel {
    pub fn new(space: AtomSpace, rules: Vec<ConjunctiveRule>) -> Self {
        Self { space, rules }
    }

    /// Total atoms, counted with repetition.
    pub fn n_atoms(&self) -> usize {
        self.rules.iter().map(|r| r.len()).sum()
    }

    pub fn describe(&self, schema: &FeatureSchema) -> Vec<String> {
        self.rules.iter().map(|r| r.describe(&self.space, schema)).collect()
    }
}

impl Classifier for DnfModel {
    fn dim(&self) -> usize {
        self.space.n_attributes * SimilarityFunction::COUNT
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        self.rules.iter().any(|r| r.matches(&self.space, x)) as Label
    }
}

pub fn dnf_predict(model: &DnfModel, x: &BooleanFeatureVector) -> Result<Label> {
    if x.atoms.len() != model.space.len() {
        return Err(Error::DimensionMismatch {
            expected: model.space.len(),
            actual: x.atoms.len(),
        });
    }
    Ok(model.rules.iter().any(|r| r.matches_atoms(&x.atoms)) as Label)
}

/// Sequential covering: learn a rule on the positives not yet covered plus
/// every negative, keep it if it is non-empty and meets the precision target,
/// and repeat until all positives are covered or no acceptable rule remains.
pub fn train_dnf(examples: &[LabeledExample<'_>], space: AtomSpace, params: &RuleParams) -> Result<DnfModel> {
    super::require_both_classes(examples)?;
    let (atoms, labels) = atom_matrix(examples, &space)?;
    let mut rules = Vec::new();
    let mut rows: Vec<usize> = (0..examples.len()).collect();
    while rules.len() < params.max_rules && rows.iter().any(|&i| labels[i] == 1) {
        let rule = grow_rule(&atoms, &labels, &rows, space.len(), params.constraints())?;
        if rule.is_empty() || rule.precision < params.min_precision {
            break;
        }
        rows.retain(|&i| labels[i] == 0 || !rule.matches_atoms(&atoms[i]));
        rules.push(rule);
    }
    Ok(DnfModel::new(space, rules))
}
