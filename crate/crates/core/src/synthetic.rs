//! Synthetic matching tasks generated directly in feature space.
//!
//! Each pair draws an overall similarity level from a class dependent range
//! and spreads it over the attributes with zero-mean deviations, so the
//! classes are separated by the attribute mean rather than by any single
//! attribute. The 21 values of an attribute are fixed monotone transforms of
//! its latent value plus a little jitter. A fraction of pairs sits next to
//! the boundary, and a fraction gets one attribute from the opposite class,
//! which is the feature noise.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CandidatePair;
use crate::features::{FeatureMatrix, FeatureSchema, SimilarityFunction};
use crate::task::MatchingTask;
use crate::{rng, Error, Label, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_pairs: usize,
    /// Fraction of matches.
    pub skew: f64,
    pub n_attributes: usize,
    /// Fraction of pairs with one attribute drawn from the opposite class.
    pub feature_noise: f64,
    /// Fraction of each class drawn just beside the boundary.
    pub hard_fraction: f64,
    /// Half-width of the per-attribute deviation from the pair's level.
    pub spread: f64,
    /// Fraction of non-matches whose whole feature vector is exactly zero.
    pub null_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_pairs: 2000,
            skew: 0.1,
            n_attributes: 3,
            feature_noise: 0.1,
            hard_fraction: 0.3,
            spread: 0.3,
            null_fraction: 0.0,
            seed: 0,
        }
    }
}

const MATCH: (f64, f64) = (0.6, 0.95);
const MATCH_HARD: (f64, f64) = (0.52, 0.6);
const NON_MATCH: (f64, f64) = (0.05, 0.3);
const NON_MATCH_HARD: (f64, f64) = (0.3, 0.48);

/// Per-function exponent so the 21 values of an attribute differ but stay
/// monotone in the latent similarity.
fn gamma(f: usize) -> f64 {
    0.6 + 0.9 * (f as f64 * 0.618_034).fract()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("skew", self.skew),
            ("feature_noise", self.feature_noise),
            ("hard_fraction", self.hard_fraction),
            ("null_fraction", self.null_fraction),
            ("spread", self.spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("synthetic {name} {v} outside [0, 1]")));
            }
        }
        if self.n_pairs == 0 || self.n_attributes == 0 {
            return Err(Error::invalid("synthetic task needs pairs and attributes"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<MatchingTask> {
        self.validate()?;
        let mut r = rng::stream(self.seed, "synthetic");
        let positives = (self.n_pairs as f64 * self.skew).round() as usize;
        let mut labels: Vec<Label> = (0..self.n_pairs).map(|i| (i < positives) as Label).collect();
        labels.shuffle(&mut r);

        let dim = self.n_attributes * SimilarityFunction::COUNT;
        let mut rows = Vec::with_capacity(self.n_pairs);
        for &y in &labels {
            let mut row = vec![0.0; dim];
            if y == 0 && r.random::<f64>() < self.null_fraction {
                rows.push(row);
                continue;
            }
            let hard = r.random::<f64>() < self.hard_fraction;
            let range = |class: Label, hard: bool| match (class, hard) {
                (1, false) => MATCH,
                (1, true) => MATCH_HARD,
                (_, false) => NON_MATCH,
                (_, true) => NON_MATCH_HARD,
            };
            let (lo, hi) = range(y, hard);
            let level: f64 = r.random_range(lo..hi);
            let mut dev: Vec<f64> = (0..self.n_attributes).map(|_| r.random_range(-1.0..=1.0) * self.spread).collect();
            let mean_dev = dev.iter().sum::<f64>() / dev.len() as f64;
            dev.iter_mut().for_each(|d| *d -= mean_dev);
            let mut latent: Vec<f64> = dev.iter().map(|d| (level + d).clamp(0.01, 1.0)).collect();
            if r.random::<f64>() < self.feature_noise {
                let (lo, hi) = range(1 - y, false);
                latent[r.random_range(0..self.n_attributes)] = r.random_range(lo..hi);
            }
            for (a, &s) in latent.iter().enumerate() {
                for f in 0..SimilarityFunction::COUNT {
                    let jitter = r.random_range(-0.02..0.02);
                    row[a * SimilarityFunction::COUNT + f] = (s.powf(gamma(f)) + jitter).clamp(0.005, 1.0);
                }
            }
            rows.push(row);
        }

        let pairs = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| CandidatePair {
                pair_id: i,
                left_id: format!("l{i}"),
                right_id: format!("r{i}"),
                gold_label: Some(y),
            })
            .collect();
        Ok(MatchingTask {
            name: "synthetic".into(),
            schema: FeatureSchema::new((0..self.n_attributes).map(|a| format!("attr{a}")).collect()),
            pairs,
            features: FeatureMatrix::from_rows(dim, rows)?,
            records: None,
            gold_report: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::class_skew;
    use crate::features::FeatureSource;

    #[test]
    fn shape_and_skew() {
        let task = SyntheticSpec::default().generate().unwrap();
        assert_eq!(task.len(), 2000);
        assert_eq!(task.features.dim(), 63);
        assert!((class_skew(&task.pairs) - 0.1).abs() < 1e-12);
        assert!(task.features.rows().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = SyntheticSpec::default().generate().unwrap();
        let b = SyntheticSpec::default().generate().unwrap();
        let c = SyntheticSpec { seed: 1, ..SyntheticSpec::default() }.generate().unwrap();
        assert_eq!(a.features, b.features);
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn null_pairs_are_all_zero_and_others_nowhere_zero() {
        let spec = SyntheticSpec {
            null_fraction: 0.5,
            ..SyntheticSpec::default()
        };
        let task = spec.generate().unwrap();
        let mut nulls = 0;
        for (p, row) in task.pairs.iter().zip(task.features.rows()) {
            if row.iter().all(|&v| v == 0.0) {
                nulls += 1;
                assert_eq!(p.gold_label, Some(0));
            } else {
                assert!(row.iter().all(|&v| v > 0.0));
            }
        }
        assert!((800..1000).contains(&nulls), "{nulls}");
    }

    #[test]
    fn without_noise_the_mean_similarity_separates_classes() {
        let spec = SyntheticSpec {
            feature_noise: 0.0,
            ..SyntheticSpec::default()
        };
        let task = spec.generate().unwrap();
        // invert the per-function transform and average out the jitter
        let latent = |row: &[f64]| {
            row.iter().enumerate().map(|(d, v)| v.powf(1.0 / gamma(d % SimilarityFunction::COUNT))).sum::<f64>()
                / row.len() as f64
        };
        let max_neg = task.pairs.iter().filter(|p| p.gold_label == Some(0)).map(|p| latent(task.features.row(p.pair_id))).fold(0.0, f64::max);
        let min_pos = task.pairs.iter().filter(|p| p.gold_label == Some(1)).map(|p| latent(task.features.row(p.pair_id))).fold(1.0, f64::min);
        assert!(max_neg < min_pos, "{max_neg} vs {min_pos}");
    }
}
