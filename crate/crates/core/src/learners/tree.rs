//! Unpruned Gini decision trees and random forests of them.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_both_classes, require_dim, Classifier, LabeledExample};
use crate::{rng, Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 10 }
    }
}

/// Arena node. `Split` sends `x[feature] >= threshold` to `above`, the rest to `below`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: Label,
    },
    Split {
        feature: usize,
        threshold: f64,
        below: usize,
        above: usize,
    },
}

/// Binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub dim: usize,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(dim: usize, label: Label) -> Self {
        Self {
            dim,
            nodes: vec![Node::Leaf { label }],
        }
    }

    /// Edges on the longest root-to-leaf path; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { .. } => best = best.max(d),
                Node::Split { below, above, .. } => {
                    stack.push((below, d + 1));
                    stack.push((above, d + 1));
                }
            }
        }
        best
    }
}

impl Classifier for DecisionTree {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    below,
                    above,
                } => id = if x[feature] >= threshold { above } else { below },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub dim: usize,
    /// Features drawn per split: `floor(log2(dim + 1))`, at least 1.
    pub split_feature_count: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn split_feature_count(dim: usize) -> usize {
        ((dim + 1) as f64).log2().floor().max(1.0) as usize
    }

    pub fn positive_votes(&self, x: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict_unchecked(x) == 1).count()
    }
}

impl Classifier for ForestModel {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Majority vote; a split vote goes to the match class.
    fn predict_unchecked(&self, x: &[f64]) -> Label {
        (2 * self.positive_votes(x) >= self.trees.len()) as Label
    }
}

/// `(positive_votes, n_trees)`.
pub fn forest_votes(model: &ForestModel, x: &[f64]) -> Result<(usize, usize)> {
    require_dim(model.dim, x)?;
    Ok((model.positive_votes(x), model.trees.len()))
}

/// Grows `n_trees` trees, each on its own bootstrap resample and with its own
/// child random stream, so the result is independent of the thread pool.
pub fn train_forest(examples: &[LabeledExample<'_>], n_trees: usize, seed: u64) -> Result<ForestModel> {
    require_both_classes(examples)?;
    if n_trees == 0 {
        return Err(crate::Error::invalid("a forest needs at least one tree"));
    }
    let dim = examples[0].features.len();
    for e in examples {
        require_dim(dim, e.features)?;
    }
    let mtry = ForestModel::split_feature_count(dim);
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::from_seed(rng::child_seed(seed, t as u64));
            let sample: Vec<usize> = (0..examples.len()).map(|_| r.random_range(0..examples.len())).collect();
            grow_tree(examples, sample, dim, mtry, &mut r)
        })
        .collect();
    Ok(ForestModel {
        dim,
        split_feature_count: mtry,
        trees,
    })
}

fn majority(examples: &[LabeledExample<'_>], idx: &[usize]) -> Label {
    let pos = idx.iter().filter(|&&i| examples[i].label == 1).count();
    (2 * pos >= idx.len()) as Label
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

/// Best Gini split on one feature, or `None` when the feature is constant.
fn best_split_on(examples: &[LabeledExample<'_>], idx: &[usize], feature: usize) -> Option<Candidate> {
    let mut vals: Vec<(f64, Label)> = idx.iter().map(|&i| (examples[i].features[feature], examples[i].label)).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = vals.len() as f64;
    let total_pos = vals.iter().filter(|v| v.1 == 1).count() as f64;
    let gini = |pos: f64, cnt: f64| {
        if cnt == 0.0 {
            0.0
        } else {
            let p = pos / cnt;
            cnt * 2.0 * p * (1.0 - p)
        }
    };
    let mut best: Option<Candidate> = None;
    let mut left_pos = 0.0;
    for k in 1..vals.len() {
        left_pos += (vals[k - 1].1 == 1) as u8 as f64;
        let (lo, hi) = (vals[k - 1].0, vals[k].0);
        if lo == hi {
            continue;
        }
        let left_n = k as f64;
        let impurity = (gini(left_pos, left_n) + gini(total_pos - left_pos, n - left_n)) / n;
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            let mid = lo + (hi - lo) / 2.0;
            best = Some(Candidate {
                impurity,
                feature,
                threshold: if mid > lo { mid } else { hi },
            });
        }
    }
    best
}

/// Grows to purity. At each node `mtry` features are examined in random
/// order; if none of them can split the node, further features are examined
/// until one can. Ties in impurity go to the lowest feature index.
fn grow_tree(
    examples: &[LabeledExample<'_>],
    sample: Vec<usize>,
    dim: usize,
    mtry: usize,
    r: &mut impl Rng,
) -> DecisionTree {
    let mut nodes = vec![Node::Leaf { label: 0 }];
    let mut stack = vec![(0usize, sample)];
    let mut features: Vec<usize> = (0..dim).collect();
    while let Some((id, idx)) = stack.pop() {
        let pos = idx.iter().filter(|&&i| examples[i].label == 1).count();
        if pos == 0 || pos == idx.len() {
            nodes[id] = Node::Leaf {
                label: (pos > 0) as Label,
            };
            continue;
        }
        features.shuffle(r);
        let mut best: Option<Candidate> = None;
        for (k, &f) in features.iter().enumerate() {
            if k >= mtry && best.is_some() {
                break;
            }
            if let Some(c) = best_split_on(examples, &idx, f) {
                let better = match &best {
                    None => true,
                    Some(b) => c.impurity < b.impurity || (c.impurity == b.impurity && c.feature < b.feature),
                };
                if better {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            nodes[id] = Node::Leaf {
                label: majority(examples, &idx),
            };
            continue;
        };
        let (above_idx, below_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| examples[i].features[split.feature] >= split.threshold);
        let below = nodes.len();
        let above = below + 1;
        nodes.push(Node::Leaf { label: 0 });
        nodes.push(Node::Leaf { label: 0 });
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            below,
            above,
        };
        stack.push((below, below_idx));
        stack.push((above, above_idx));
    }
    DecisionTree { dim, nodes }
}
