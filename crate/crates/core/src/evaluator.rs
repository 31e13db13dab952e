//! Quality, label-efficiency and interpretability metrics.

use serde::{Deserialize, Serialize};

use crate::features::FeatureSchema;
use crate::learners::{Classifier, DecisionTree, ForestModel, Model, Node};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Confusion-matrix metrics over `eval_set`. `predictions` and `gold` are
/// indexed by pair id.
pub fn prf1(predictions: &[Label], gold: &[Option<Label>], eval_set: &[usize]) -> Result<Metrics> {
    if eval_set.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for &id in eval_set {
        let p = *predictions.get(id).ok_or(Error::UnknownPair(id))?;
        let g = gold
            .get(id)
            .copied()
            .flatten()
            .ok_or_else(|| Error::invalid(format!("pair {id} has no gold label")))?;
        match (p, g) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => {}
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Ge,
    Lt,
}

/// One edge of a root-to-leaf path: `x[feature] ≥ threshold` or `< threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathAtom {
    pub feature: usize,
    pub comparison: Comparison,
    pub threshold: f64,
}

impl PathAtom {
    pub fn holds(&self, x: &[f64]) -> bool {
        match self.comparison {
            Comparison::Ge => x[self.feature] >= self.threshold,
            Comparison::Lt => x[self.feature] < self.threshold,
        }
    }

    pub fn describe(&self, schema: &FeatureSchema) -> String {
        let op = match self.comparison {
            Comparison::Ge => "≥",
            Comparison::Lt => "<",
        };
        format!("{} {op} {}", schema.dimension_name(self.feature), self.threshold)
    }
}

/// DNF read off a decision tree: one conjunction per positive leaf, one atom
/// per edge on its path, with no simplification. Unlike rule-learner DNFs the
/// atoms may be upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDnf {
    pub dim: usize,
    pub conjuncts: Vec<Vec<PathAtom>>,
}

impl PathDnf {
    pub fn n_atoms(&self) -> usize {
        self.conjuncts.iter().map(Vec::len).sum()
    }

    pub fn describe(&self, schema: &FeatureSchema) -> Vec<String> {
        self.conjuncts
            .iter()
            .map(|c| {
                if c.is_empty() {
                    "true".to_string()
                } else {
                    c.iter().map(|a| a.describe(schema)).collect::<Vec<_>>().join(" ∧ ")
                }
            })
            .collect()
    }
}

impl Classifier for PathDnf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        self.conjuncts.iter().any(|c| c.iter().all(|a| a.holds(x))) as Label
    }
}

pub fn tree_to_dnf(tree: &DecisionTree) -> PathDnf {
    let mut conjuncts = Vec::new();
    let mut stack: Vec<(usize, Vec<PathAtom>)> = vec![(0, Vec::new())];
    while let Some((id, path)) = stack.pop() {
        match tree.nodes[id] {
            Node::Leaf { label } => {
                if label == 1 {
                    conjuncts.push(path);
                }
            }
            Node::Split {
                feature,
                threshold,
                below,
                above,
            } => {
                let edge = |comparison| PathAtom {
                    feature,
                    comparison,
                    threshold,
                };
                let mut lower = path.clone();
                lower.push(edge(Comparison::Lt));
                let mut upper = path;
                upper.push(edge(Comparison::Ge));
                // pushed so the `above` branch is emitted first
                stack.push((below, lower));
                stack.push((above, upper));
            }
        }
    }
    PathDnf {
        dim: tree.dim,
        conjuncts,
    }
}

/// Atoms counted with repetition; `None` for families without a rule form.
pub fn count_atoms(model: &Model) -> Option<usize> {
    match model {
        Model::Dnf(m) => Some(m.n_atoms()),
        Model::Forest(f) => Some(f.trees.iter().map(|t| tree_to_dnf(t).n_atoms()).sum()),
        Model::Linear(_) | Model::Mlp(_) => None,
    }
}

/// Deepest tree in the forest, in edges.
pub fn forest_depth(forest: &ForestModel) -> usize {
    forest.trees.iter().map(DecisionTree::depth).max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityReport {
    pub n_atoms: usize,
    pub max_depth: Option<usize>,
    pub dnf_text: Vec<String>,
}

pub fn interpretability(model: &Model, schema: &FeatureSchema) -> Option<InterpretabilityReport> {
    match model {
        Model::Dnf(m) => Some(InterpretabilityReport {
            n_atoms: m.n_atoms(),
            max_depth: None,
            dnf_text: m.describe(schema),
        }),
        Model::Forest(f) => {
            let dnfs: Vec<PathDnf> = f.trees.iter().map(tree_to_dnf).collect();
            Some(InterpretabilityReport {
                n_atoms: dnfs.iter().map(PathDnf::n_atoms).sum(),
                max_depth: Some(forest_depth(f)),
                dnf_text: dnfs.iter().flat_map(|d| d.describe(schema)).collect(),
            })
        }
        Model::Linear(_) | Model::Mlp(_) => None,
    }
}

/// Labels used at the first row from which F1 stays within `epsilon` for
/// `window` consecutive rows (that row included). Falls back to the last
/// row's labels when the series never settles.
pub fn labels_to_convergence(series: &[(usize, f64)], epsilon: f64, window: usize) -> usize {
    let window = window.max(1);
    for start in 0..series.len() {
        if start + window > series.len() {
            break;
        }
        let span = &series[start..start + window];
        let (lo, hi) = span
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, f)| (lo.min(f), hi.max(f)));
        if hi - lo <= epsilon {
            return series[start].0;
        }
    }
    series.last().map_or(0, |r| r.0)
}

/// Best F1 and the labels at its first occurrence.
pub fn best_f1(series: &[(usize, f64)]) -> Option<(f64, usize)> {
    series
        .iter()
        .fold(None, |best: Option<(f64, usize)>, &(labels, f1)| match best {
            Some((b, _)) if b >= f1 => best,
            _ => Some((f1, labels)),
        })
}
