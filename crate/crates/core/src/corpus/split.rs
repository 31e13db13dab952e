use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::CandidatePair;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Pool and test set are both every post-blocking pair.
    Progressive,
    /// Disjoint stratified split; `holdout_fraction` of each class goes to test.
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default = "default_fraction")]
    pub holdout_fraction: f64,
}

fn default_fraction() -> f64 {
    0.2
}

impl SplitSpec {
    pub fn progressive() -> Self {
        Self {
            mode: SplitMode::Progressive,
            holdout_fraction: default_fraction(),
        }
    }

    pub fn holdout(fraction: f64) -> Self {
        Self {
            mode: SplitMode::Holdout,
            holdout_fraction: fraction,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::progressive()
    }
}

/// Pair ids of the unlabeled pool and the evaluation set, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split(pairs: &[CandidatePair], spec: &SplitSpec, seed: u64) -> Result<Split> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for p in pairs {
        match p.gold_label {
            Some(1) => positives.push(p.pair_id),
            Some(_) => negatives.push(p.pair_id),
            None => return Err(Error::invalid(format!("pair {} has no gold label", p.pair_id))),
        }
    }
    match spec.mode {
        SplitMode::Progressive => {
            let all: Vec<usize> = pairs.iter().map(|p| p.pair_id).collect();
            Ok(Split {
                pool: all.clone(),
                test: all,
            })
        }
        SplitMode::Holdout => {
            if !(0.0..1.0).contains(&spec.holdout_fraction) {
                return Err(Error::invalid("holdout fraction must lie in [0, 1)"));
            }
            if positives.len() < 5 || negatives.len() < 5 {
                return Err(Error::invalid(format!(
                    "holdout split needs at least 5 pairs of each class ({} matches, {} non-matches)",
                    positives.len(),
                    negatives.len()
                )));
            }
            let mut rng = rng::from_seed(rng::stream_seed(seed, "split"));
            let mut pool = Vec::new();
            let mut test = Vec::new();
            for class in [&mut positives, &mut negatives] {
                class.shuffle(&mut rng);
                let n_test = (class.len() as f64 * spec.holdout_fraction).round() as usize;
                test.extend_from_slice(&class[..n_test]);
                pool.extend_from_slice(&class[n_test..]);
            }
            pool.sort_unstable();
            test.sort_unstable();
            Ok(Split { pool, test })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(n: usize, positives: usize) -> Vec<CandidatePair> {
        (0..n)
            .map(|i| CandidatePair {
                pair_id: i,
                left_id: format!("l{i}"),
                right_id: format!("r{i}"),
                gold_label: Some((i < positives) as u8),
            })
            .collect()
    }

    #[test]
    fn progressive_uses_everything_twice() {
        let s = split(&pairs(100, 10), &SplitSpec::progressive(), 1).unwrap();
        assert_eq!(s.pool.len(), 100);
        assert_eq!(s.pool, s.test);
    }

    #[test]
    fn holdout_is_stratified() {
        let ps = pairs(100, 10);
        let s = split(&ps, &SplitSpec::holdout(0.2), 1).unwrap();
        let test_matches = s.test.iter().filter(|&&i| ps[i].gold_label == Some(1)).count();
        assert_eq!(test_matches, 2);
        assert_eq!(s.test.len() - test_matches, 18);
        assert_eq!(s.pool.len(), 80);
    }

    #[test]
    fn holdout_is_deterministic_per_seed() {
        let ps = pairs(100, 10);
        let a = split(&ps, &SplitSpec::holdout(0.2), 9).unwrap();
        let b = split(&ps, &SplitSpec::holdout(0.2), 9).unwrap();
        let c = split(&ps, &SplitSpec::holdout(0.2), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn holdout_needs_five_of_each_class() {
        assert!(split(&pairs(100, 4), &SplitSpec::holdout(0.2), 1).is_err());
    }

    proptest! {
        #[test]
        fn holdout_skew_matches_within_one_pair(n in 40usize..400, pos_frac in 0.05f64..0.5, seed: u64) {
            let positives = ((n as f64 * pos_frac) as usize).max(5);
            let ps = pairs(n, positives);
            let s = split(&ps, &SplitSpec::holdout(0.2), seed).unwrap();
            let test_matches = s.test.iter().filter(|&&i| ps[i].gold_label == Some(1)).count() as f64;
            let expected = s.test.len() as f64 * positives as f64 / n as f64;
            prop_assert!((test_matches - expected).abs() <= 1.0);
            let mut all: Vec<usize> = s.pool.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
