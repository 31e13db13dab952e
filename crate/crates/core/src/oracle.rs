//! Label sources: gold truth, gold with fixed-probability flips, or a human
//! whose answers arrive out of band.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, StreamRng};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Perfect,
    Noisy,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub mode: OracleMode,
    #[serde(default)]
    pub noise_p: f64,
}

impl OracleConfig {
    pub fn perfect() -> Self {
        Self {
            mode: OracleMode::Perfect,
            noise_p: 0.0,
        }
    }

    pub fn noisy(noise_p: f64) -> Self {
        Self {
            mode: OracleMode::Noisy,
            noise_p,
        }
    }

    pub fn human() -> Self {
        Self {
            mode: OracleMode::Human,
            noise_p: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_p) {
            return Err(Error::invalid(format!("noise_p {} outside [0, 1]", self.noise_p)));
        }
        if self.mode != OracleMode::Noisy && self.noise_p != 0.0 {
            return Err(Error::invalid("noise_p is only meaningful for the noisy oracle"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Label(Label),
    /// The human has not answered yet.
    Pending,
}

/// Answers are memoized: a pair asked twice gets its first answer again.
#[derive(Debug, Clone)]
pub struct Oracle {
    config: OracleConfig,
    gold: Vec<Option<Label>>,
    answers: BTreeMap<usize, Label>,
    rng: StreamRng,
    flips: usize,
}

impl Oracle {
    /// `gold[pair_id]` is the true label, if known.
    pub fn new(config: OracleConfig, gold: Vec<Option<Label>>, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            gold,
            answers: BTreeMap::new(),
            rng: rng::stream(seed, "oracle"),
            flips: 0,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn ask(&mut self, pair_id: usize) -> Result<Answer> {
        if pair_id >= self.gold.len() {
            return Err(Error::UnknownPair(pair_id));
        }
        if let Some(&label) = self.answers.get(&pair_id) {
            return Ok(Answer::Label(label));
        }
        let label = match self.config.mode {
            OracleMode::Human => return Ok(Answer::Pending),
            OracleMode::Perfect => self.gold_of(pair_id)?,
            OracleMode::Noisy => {
                let gold = self.gold_of(pair_id)?;
                if self.rng.random::<f64>() < self.config.noise_p {
                    self.flips += 1;
                    1 - gold
                } else {
                    gold
                }
            }
        };
        self.answers.insert(pair_id, label);
        Ok(Answer::Label(label))
    }

    /// Records an externally supplied answer. Re-sending the same answer is
    /// a no-op; a different one is a conflict and the first answer stays.
    pub fn provide(&mut self, pair_id: usize, label: Label) -> Result<()> {
        self.check_answer(pair_id, label)?;
        self.answers.entry(pair_id).or_insert(label);
        Ok(())
    }

    /// Validates an answer without recording it.
    pub fn check_answer(&self, pair_id: usize, label: Label) -> Result<()> {
        if pair_id >= self.gold.len() {
            return Err(Error::UnknownPair(pair_id));
        }
        if label > 1 {
            return Err(Error::invalid(format!("label {label} is not 0 or 1")));
        }
        match self.answers.get(&pair_id) {
            Some(&existing) if existing != label => Err(Error::LabelConflict {
                pair_id,
                existing,
                submitted: label,
            }),
            _ => Ok(()),
        }
    }

    pub fn answer(&self, pair_id: usize) -> Option<Label> {
        self.answers.get(&pair_id).copied()
    }

    pub fn answers(&self) -> &BTreeMap<usize, Label> {
        &self.answers
    }

    /// Noisy answers that differ from gold so far.
    pub fn flips(&self) -> usize {
        self.flips
    }

    fn gold_of(&self, pair_id: usize) -> Result<Label> {
        self.gold[pair_id].ok_or_else(|| Error::invalid(format!("pair {pair_id} has no gold label")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(n: usize) -> Vec<Option<Label>> {
        (0..n).map(|i| Some((i % 3 == 0) as Label)).collect()
    }

    fn label(a: Answer) -> Label {
        match a {
            Answer::Label(l) => l,
            Answer::Pending => panic!("pending"),
        }
    }

    #[test]
    fn perfect_and_extreme_noise() {
        let mut perfect = Oracle::new(OracleConfig::perfect(), gold(50), 1).unwrap();
        let mut zero = Oracle::new(OracleConfig::noisy(0.0), gold(50), 1).unwrap();
        let mut one = Oracle::new(OracleConfig::noisy(1.0), gold(50), 1).unwrap();
        for i in 0..50 {
            let g = gold(50)[i].unwrap();
            assert_eq!(label(perfect.ask(i).unwrap()), g);
            assert_eq!(label(zero.ask(i).unwrap()), g);
            assert_eq!(label(one.ask(i).unwrap()), 1 - g);
        }
    }

    #[test]
    fn flip_rate_matches_noise() {
        let mut o = Oracle::new(OracleConfig::noisy(0.2), gold(10_000), 7).unwrap();
        for i in 0..10_000 {
            o.ask(i).unwrap();
        }
        let rate = o.flips() as f64 / 10_000.0;
        assert!((rate - 0.2).abs() <= 0.01, "{rate}");
    }

    #[test]
    fn answers_are_memoized() {
        let mut o = Oracle::new(OracleConfig::noisy(0.5), gold(100), 3).unwrap();
        let first: Vec<Label> = (0..100).map(|i| label(o.ask(i).unwrap())).collect();
        let again: Vec<Label> = (0..100).map(|i| label(o.ask(i).unwrap())).collect();
        assert_eq!(first, again);
    }

    #[test]
    fn human_answers_and_conflicts() {
        let mut o = Oracle::new(OracleConfig::human(), gold(10), 0).unwrap();
        assert_eq!(o.ask(4).unwrap(), Answer::Pending);
        o.provide(4, 1).unwrap();
        o.provide(4, 1).unwrap();
        assert!(matches!(o.provide(4, 0), Err(Error::LabelConflict { existing: 1, .. })));
        assert_eq!(o.ask(4).unwrap(), Answer::Label(1));
        assert!(matches!(o.provide(10, 1), Err(Error::UnknownPair(10))));
        assert!(o.provide(3, 2).is_err());
    }

    #[test]
    fn rejects_bad_config_and_unknown_pairs() {
        assert!(Oracle::new(OracleConfig::noisy(1.5), gold(3), 0).is_err());
        let bad = OracleConfig {
            mode: OracleMode::Perfect,
            noise_p: 0.1,
        };
        assert!(bad.validate().is_err());
        let mut o = Oracle::new(OracleConfig::perfect(), gold(3), 0).unwrap();
        assert!(matches!(o.ask(3), Err(Error::UnknownPair(3))));
    }
}
