//! Margin (uncertainty) sampling and blocking dimensions for linear models.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SelectionAux, SelectionResult};
use crate::features::FeatureSource;
use crate::learners::{LinearModel, MlpModel, Model};
use crate::{Error, Result};

/// A model whose distance to the decision boundary can be measured.
pub trait MarginModel: Sync {
    fn dim(&self) -> usize;
    /// Unsigned margin; smaller means more ambiguous.
    fn abs_margin(&self, x: &[f64]) -> f64;
}

impl MarginModel for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn abs_margin(&self, x: &[f64]) -> f64 {
        self.decision(x).abs()
    }
}

impl MarginModel for MlpModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn abs_margin(&self, x: &[f64]) -> f64 {
        self.margin(x).abs()
    }
}

impl Model {
    pub fn as_margin_model(&self) -> Option<&dyn MarginModel> {
        match self {
            Model::Linear(m) => Some(m),
            Model::Mlp(m) => Some(m),
            _ => None,
        }
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Smallest `(margin, pair_id)` first.
fn bottom_k(mut scored: Vec<(f64, usize)>, batch: usize) -> Vec<usize> {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(batch).map(|(_, id)| id).collect()
}

/// The `batch` pool pairs closest to the boundary, ties to the lowest pair id.
pub fn margin_select<M, F>(model: &M, features: &F, pool: &[usize], batch: usize) -> Result<SelectionResult>
where
    M: MarginModel + ?Sized,
    F: FeatureSource + ?Sized,
{
    check_dim(model.dim(), features.dim())?;
    let started = Instant::now();
    let scored: Vec<(f64, usize)> = pool
        .par_iter()
        .map(|&id| (model.abs_margin(&features.vector(id)), id))
        .collect();
    let chosen = bottom_k(scored, batch);
    Ok(SelectionResult {
        chosen,
        scoring_time: started.elapsed(),
        aux: SelectionAux {
            dot_products: pool.len(),
            ..SelectionAux::default()
        },
        ..SelectionResult::default()
    })
}

/// Feature dimensions with the largest absolute weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingDims {
    /// Sorted by descending `|w|`, ties to the lower index.
    pub dims: Vec<usize>,
    pub k: usize,
}

impl BlockingDims {
    pub fn top_k(model: &LinearModel, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("blocking needs K >= 1"));
        }
        let w = &model.weights;
        let mut dims: Vec<usize> = (0..w.len()).collect();
        dims.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
        dims.truncate(k);
        Ok(Self { dims, k })
    }

    /// Blocking with every dimension cannot skip anything.
    pub fn covers_all(&self, dim: usize) -> bool {
        self.k >= dim
    }
}

/// Margin selection that first reads only the top-K weight dimensions of each
/// pair and skips pairs where all of them are exactly zero.
pub fn blocked_margin_select<F: FeatureSource + ?Sized>(
    model: &LinearModel,
    features: &F,
    pool: &[usize],
    batch: usize,
    k: usize,
) -> Result<SelectionResult> {
    let blocking = BlockingDims::top_k(model, k)?;
    if blocking.covers_all(model.weights.len()) {
        return margin_select(model, features, pool, batch);
    }
    check_dim(model.weights.len(), features.dim())?;
    let started = Instant::now();
    let outcomes: Vec<std::result::Result<(f64, usize), usize>> = pool
        .par_iter()
        .map(|&id| {
            if blocking.dims.iter().all(|&d| features.value(id, d) == 0.0) {
                Err(id)
            } else {
                Ok((model.abs_margin(&features.vector(id)), id))
            }
        })
        .collect();
    let mut scored = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(s) => scored.push(s),
            Err(id) => skipped.push(id),
        }
    }
    let dot_products = scored.len();
    let chosen = bottom_k(scored, batch);
    let short_batch = chosen.len() < batch.min(pool.len());
    Ok(SelectionResult {
        chosen,
        scoring_time: started.elapsed(),
        aux: SelectionAux {
            skipped,
            dot_products,
            short_batch,
            ..SelectionAux::default()
        },
        ..SelectionResult::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;
    use crate::learners::testing::em_like;
    use crate::learners::{mlp_margin, train_linear, train_mlp, LinearParams, MlpParams};

    #[test]
    fn pair_on_the_hyperplane_comes_first() {
        let model = LinearModel::new(vec![1.0, -1.0], 0.0);
        let features = FeatureMatrix::from_rows(2, vec![vec![0.9, 0.1], vec![0.3, 0.3], vec![0.2, 0.6]]).unwrap();
        let r = margin_select(&model, &features, &[0, 1, 2], 1).unwrap();
        assert_eq!(r.chosen, vec![1]);
        assert_eq!(r.committee_creation_time, std::time::Duration::ZERO);
    }

    #[test]
    fn margin_selection_equals_full_scan() {
        let data = em_like(300, 8, 0.15, 6);
        let ex = data.examples();
        let model = train_linear(&ex, &LinearParams::default(), 1).unwrap();
        let features = FeatureMatrix::from_rows(8, data.x.clone()).unwrap();
        let pool: Vec<usize> = (0..300).filter(|i| i % 3 != 0).collect();
        let got = margin_select(&model, &features, &pool, 10).unwrap().chosen;
        // full scan: repeatedly extract the minimum
        let mut remaining = pool.clone();
        let mut expected = Vec::new();
        for _ in 0..10 {
            let mut best = 0;
            for i in 1..remaining.len() {
                let (a, b) = (model.decision(&data.x[remaining[i]]).abs(), model.decision(&data.x[remaining[best]]).abs());
                if a < b || (a == b && remaining[i] < remaining[best]) {
                    best = i;
                }
            }
            expected.push(remaining.remove(best));
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn mlp_margin_ranking_matches_probability_ranking() {
        let data = em_like(200, 6, 0.2, 2);
        let model = train_mlp(&data.examples(), &MlpParams::default(), 3).unwrap();
        let features = FeatureMatrix::from_rows(6, data.x.clone()).unwrap();
        let pool: Vec<usize> = (0..200).collect();
        let got = margin_select(&model, &features, &pool, 15).unwrap().chosen;
        let mut by_prob: Vec<(f64, usize)> =
            pool.iter().map(|&i| ((mlp_margin(&model, &data.x[i]).unwrap().1 - 0.5).abs(), i)).collect();
        by_prob.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = by_prob.iter().take(15).map(|p| p.1).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn top_k_dims_are_sorted_by_weight_magnitude() {
        let model = LinearModel::new(vec![0.1, -0.9, 0.5, 0.9, 0.0], 0.0);
        assert_eq!(BlockingDims::top_k(&model, 3).unwrap().dims, vec![1, 3, 2]);
        assert_eq!(BlockingDims::top_k(&model, 9).unwrap().dims.len(), 5);
        assert!(BlockingDims::top_k(&model, 0).is_err());
    }

    #[test]
    fn all_zero_pairs_are_skipped_with_margin_equal_to_bias() {
        let model = LinearModel::new(vec![2.0, 0.5, 0.1], -0.4);
        let features = FeatureMatrix::from_rows(
            3,
            vec![vec![0.0, 0.0, 0.0], vec![0.2, 0.4, 0.0], vec![0.0, 0.9, 0.3], vec![0.3, 0.0, 0.0]],
        )
        .unwrap();
        let r = blocked_margin_select(&model, &features, &[0, 1, 2, 3], 4, 1).unwrap();
        assert_eq!(r.aux.skipped, vec![0, 2]);
        assert_eq!(r.aux.dot_products, 2);
        assert!(r.aux.short_batch);
        assert_eq!(model.abs_margin(features.row(0)), 0.4);
        let full = blocked_margin_select(&model, &features, &[0, 1, 2, 3], 4, 3).unwrap();
        assert!(full.aux.skipped.is_empty());
        assert_eq!(full.chosen.len(), 4);
    }
}
