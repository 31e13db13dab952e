use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{require_both_classes, require_dim, Classifier, LabeledExample};
use crate::{rng, Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    pub epochs: usize,
    /// Step size in the first epoch; epoch t (1-based) uses `learning_rate / sqrt(t)`.
    pub learning_rate: f64,
    /// L2 penalty λ.
    pub regularization: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            regularization: 1e-3,
        }
    }
}

/// Soft-margin linear classifier `W·X + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    /// Predicts `label` everywhere; used when no separator can be trained.
    pub fn constant(dim: usize, label: Label) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: if label == 1 { 1.0 } else { -1.0 },
        }
    }

    /// Signed `W·X + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

impl Classifier for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        (self.decision(x) >= 0.0) as Label
    }
}

/// `|W·X + b|`; the sign is ignored because ambiguous examples come from both classes.
pub fn linear_margin(model: &LinearModel, x: &[f64]) -> Result<f64> {
    require_dim(model.weights.len(), x)?;
    Ok(model.decision(x).abs())
}

/// `λ/2 ‖W‖² + mean hinge loss`, labels mapped to ±1.
pub fn hinge_objective(model: &LinearModel, examples: &[LabeledExample<'_>], regularization: f64) -> f64 {
    let norm: f64 = model.weights.iter().map(|w| w * w).sum();
    let hinge: f64 = examples
        .iter()
        .map(|e| {
            let y = if e.label == 1 { 1.0 } else { -1.0 };
            (1.0 - y * model.decision(e.features)).max(0.0)
        })
        .sum();
    0.5 * regularization * norm + hinge / examples.len() as f64
}

/// Hinge-loss subgradient descent with L2 regularisation. Examples are
/// visited in a seeded shuffled order each epoch; the iterate with the lowest
/// objective at an epoch boundary is returned.
pub fn train_linear(examples: &[LabeledExample<'_>], params: &LinearParams, seed: u64) -> Result<LinearModel> {
    require_both_classes(examples)?;
    let dim = examples[0].features.len();
    for e in examples {
        require_dim(dim, e.features)?;
    }
    let mut rng = rng::from_seed(seed);
    let mut model = LinearModel::new(vec![0.0; dim], 0.0);
    let mut best = (hinge_objective(&model, examples, params.regularization), model.clone());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 1..=params.epochs {
        let eta = params.learning_rate / (epoch as f64).sqrt();
        order.shuffle(&mut rng);
        for &i in &order {
            let e = &examples[i];
            let y = if e.label == 1 { 1.0 } else { -1.0 };
            let violated = y * model.decision(e.features) < 1.0;
            let shrink = 1.0 - eta * params.regularization;
            for (w, x) in model.weights.iter_mut().zip(e.features) {
                *w *= shrink;
                if violated {
                    *w += eta * y * x;
                }
            }
            if violated {
                model.bias += eta * y;
            }
        }
        let objective = hinge_objective(&model, examples, params.regularization);
        if objective < best.0 {
            best = (objective, model.clone());
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::testing::{em_like, Data};
    use crate::Error;
    use rand::Rng;

    #[test]
    fn margin_arithmetic() {
        let m = LinearModel::new(vec![0.5, -0.5], 0.1);
        assert!((linear_margin(&m, &[1.0, 0.0]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(linear_margin(&m, &[0.0, 0.0]).unwrap(), 0.1);
        let on_plane = LinearModel::new(vec![1.0, 1.0], -1.0);
        assert_eq!(linear_margin(&on_plane, &[0.5, 0.5]).unwrap(), 0.0);
        assert!(matches!(linear_margin(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_vector_margin_is_exactly_abs_bias() {
        for b in [-3.25, -0.1, 0.0, 0.7, 12.5] {
            let m = LinearModel::new(vec![0.3; 7], b);
            assert_eq!(linear_margin(&m, &[0.0; 7]).unwrap(), b.abs());
        }
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let mut r = rng::from_seed(3);
        let mut data = Data { x: vec![], y: vec![] };
        for _ in 0..100 {
            let x0: f64 = r.random();
            if (x0 - 0.5).abs() < 0.05 {
                continue;
            }
            data.x.push(vec![x0, r.random()]);
            data.y.push((x0 > 0.5) as u8);
        }
        let m = train_linear(&data.examples(), &LinearParams::default(), 1).unwrap();
        let correct = data.x.iter().zip(&data.y).filter(|(x, &y)| m.predict_unchecked(x) == y).count();
        assert_eq!(correct, data.x.len());
    }

    #[test]
    fn same_seed_same_model() {
        let data = em_like(50, 4, 0.2, 1);
        let a = train_linear(&data.examples(), &LinearParams::default(), 9).unwrap();
        let b = train_linear(&data.examples(), &LinearParams::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    /// Coarse exhaustive search over 2-D separators `r (cos θ, sin θ)·x + b`.
    fn grid_search_objective(examples: &[LabeledExample<'_>], lambda: f64) -> f64 {
        let mut best = f64::INFINITY;
        for ti in 0..180 {
            let theta = ti as f64 * std::f64::consts::PI / 90.0;
            for ri in 0..=60 {
                let r = ri as f64 * 0.5;
                for bi in -80..=80 {
                    let b = bi as f64 * 0.25;
                    let m = LinearModel::new(vec![r * theta.cos(), r * theta.sin()], b);
                    best = best.min(hinge_objective(&m, examples, lambda));
                }
            }
        }
        best
    }

    #[test]
    fn objective_is_close_to_grid_searched_separator() {
        let data = em_like(200, 2, 0.1, 17);
        let ex = data.examples();
        let params = LinearParams::default();
        let m = train_linear(&ex, &params, 4).unwrap();
        let ours = hinge_objective(&m, &ex, params.regularization);
        let oracle = grid_search_objective(&ex, params.regularization);
        assert!(ours <= oracle * 1.05, "trained {ours} vs grid {oracle}");
    }
}
