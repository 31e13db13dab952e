//! Boolean atoms `sim_f(attr) >= tau` over the three rule-learner functions.

use serde::{Deserialize, Serialize};

use super::{featurize, FeatureSchema, SimilarityFunction};
use crate::corpus::{CandidatePair, RecordTable, SchemaAlignment};
use crate::Result;

/// Functions available to rules, in atom order.
pub const RULE_FUNCTIONS: [SimilarityFunction; 3] = [
    SimilarityFunction::ExactEquality,
    SimilarityFunction::JaroWinkler,
    SimilarityFunction::TokenJaccard,
];

/// 0.1, 0.2, ..., 1.0, each the nearest double to `k / 10`.
pub const ATOM_THRESHOLDS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

pub type AtomId = usize;

/// Atom layout: `(attr * 3 + rule_function) * 10 + threshold_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSpace {
    pub n_attributes: usize,
}

impl AtomSpace {
    pub fn new(n_attributes: usize) -> Self {
        Self { n_attributes }
    }

    pub fn len(&self) -> usize {
        self.n_attributes * RULE_FUNCTIONS.len() * ATOM_THRESHOLDS.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn atom(&self, attr: usize, function: usize, threshold: usize) -> AtomId {
        (attr * RULE_FUNCTIONS.len() + function) * ATOM_THRESHOLDS.len() + threshold
    }

    /// `(attribute, function, threshold)` of an atom.
    pub fn decode(&self, atom: AtomId) -> (usize, SimilarityFunction, f64) {
        let t = atom % ATOM_THRESHOLDS.len();
        let rest = atom / ATOM_THRESHOLDS.len();
        (rest / RULE_FUNCTIONS.len(), RULE_FUNCTIONS[rest % RULE_FUNCTIONS.len()], ATOM_THRESHOLDS[t])
    }

    /// Dimension of the numeric feature vector the atom thresholds.
    pub fn feature_index(&self, atom: AtomId) -> usize {
        let (attr, f, _) = self.decode(atom);
        FeatureSchema::index(attr, f)
    }

    /// Evaluates one atom directly on a numeric feature vector.
    pub fn holds(&self, atom: AtomId, features: &[f64]) -> bool {
        let (_, _, tau) = self.decode(atom);
        features[self.feature_index(atom)] >= tau
    }

    pub fn evaluate(&self, features: &[f64]) -> Vec<bool> {
        (0..self.len()).map(|a| self.holds(a, features)).collect()
    }

    /// e.g. `JaccardSim(name) ≥ 0.7`.
    pub fn describe(&self, atom: AtomId, schema: &FeatureSchema) -> String {
        let (attr, f, tau) = self.decode(atom);
        format!("{}({}) ≥ {}", f.name(), schema.attributes[attr], tau)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanFeatureVector {
    pub pair_id: usize,
    pub atoms: Vec<bool>,
}

pub fn booleanize(
    pair: &CandidatePair,
    left: &RecordTable,
    right: &RecordTable,
    alignment: &SchemaAlignment,
) -> Result<BooleanFeatureVector> {
    let fv = featurize(pair, left, right, alignment)?;
    Ok(BooleanFeatureVector {
        pair_id: pair.pair_id,
        atoms: AtomSpace::new(alignment.len()).evaluate(&fv.values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::tests::tables;
    use proptest::prelude::*;

    #[test]
    fn thresholds_split_at_similarity() {
        let space = AtomSpace::new(1);
        let mut x = vec![0.0; 21];
        x[SimilarityFunction::TokenJaccard.index()] = 0.55;
        let got: Vec<bool> = (0..10).map(|t| space.holds(space.atom(0, 2, t), &x)).collect();
        assert_eq!(got, [true, true, true, true, true, false, false, false, false, false]);
    }

    #[test]
    fn equality_on_identical_strings_sets_all_ten() {
        let (l, r, a, pairs) = tables();
        let b = booleanize(&pairs[0], &l, &r, &a).unwrap();
        assert_eq!(b.atoms.len(), 90);
        let space = AtomSpace::new(3);
        assert!((0..10).all(|t| b.atoms[space.atom(0, 0, t)]));
    }

    #[test]
    fn describes_atoms() {
        let schema = FeatureSchema::new(vec!["name".into()]);
        let space = schema.atoms();
        assert_eq!(space.describe(space.atom(0, 2, 6), &schema), "JaccardSim(name) ≥ 0.7");
    }

    #[test]
    fn boolean_atoms_agree_with_numeric_features() {
        let (l, r, a, pairs) = tables();
        let space = AtomSpace::new(3);
        for p in &pairs {
            let fv = featurize(p, &l, &r, &a).unwrap();
            let b = booleanize(p, &l, &r, &a).unwrap();
            for atom in 0..space.len() {
                let (_, _, tau) = space.decode(atom);
                assert_eq!(b.atoms[atom], fv.values[space.feature_index(atom)] >= tau);
            }
        }
    }

    proptest! {
        #[test]
        fn atoms_are_monotone_in_threshold(values in proptest::collection::vec(0.0f64..=1.0, 42)) {
            let space = AtomSpace::new(2);
            let atoms = space.evaluate(&values);
            for attr in 0..2 {
                for f in 0..3 {
                    for t in 1..10 {
                        if atoms[space.atom(attr, f, t)] {
                            prop_assert!(atoms[space.atom(attr, f, t - 1)]);
                        }
                    }
                }
            }
        }
    }
}
