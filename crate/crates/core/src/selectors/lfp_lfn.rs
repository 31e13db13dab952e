//! Likely false positives / negatives against a candidate rule.

use std::time::Instant;

use rayon::prelude::*;

use super::{SelectionAux, SelectionResult, Tag};
use crate::features::FeatureSource;
use crate::learners::{rule_minus, Classifier, ConjunctiveRule, DnfModel};
use crate::{Error, Result};

/// Mean of the pair's numeric similarities; a cheap stand-in for how alike
/// the two records look overall.
pub fn agg_score(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// LFPs are pool pairs the candidate matches, least similar first. LFNs are
/// pairs that a one-atom relaxation of the candidate matches but neither the
/// candidate nor the current DNF does, most similar first. Half the batch
/// (rounded up) goes to LFPs, the rest to LFNs, and a short side hands its
/// slots to the other. An empty result means the rule has nothing left to
/// learn from.
pub fn lfp_lfn_select<F: FeatureSource + ?Sized>(
    dnf: &DnfModel,
    candidate: &ConjunctiveRule,
    features: &F,
    pool: &[usize],
    batch: usize,
) -> Result<SelectionResult> {
    if features.dim() != dnf.dim() {
        return Err(Error::DimensionMismatch {
            expected: dnf.dim(),
            actual: features.dim(),
        });
    }
    let started = Instant::now();
    let relaxed = if candidate.is_empty() { Vec::new() } else { rule_minus(candidate)? };
    let space = &dnf.space;
    let classified: Vec<Option<(Tag, f64, usize)>> = pool
        .par_iter()
        .map(|&id| {
            let x = features.vector(id);
            if candidate.matches(space, &x) {
                Some((Tag::Lfp, agg_score(&x), id))
            } else if relaxed.iter().any(|r| r.matches(space, &x)) && dnf.predict_unchecked(&x) == 0 {
                Some((Tag::Lfn, agg_score(&x), id))
            } else {
                None
            }
        })
        .collect();
    let mut lfps: Vec<(f64, usize)> = Vec::new();
    let mut lfns: Vec<(f64, usize)> = Vec::new();
    for (tag, score, id) in classified.into_iter().flatten() {
        match tag {
            Tag::Lfp => lfps.push((score, id)),
            Tag::Lfn => lfns.push((score, id)),
        }
    }
    lfps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    lfns.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut lfp_quota = batch.div_ceil(2).min(lfps.len());
    let lfn_quota = (batch - lfp_quota).min(lfns.len());
    lfp_quota = (batch - lfn_quota).min(lfps.len());

    let mut chosen = Vec::with_capacity(lfp_quota + lfn_quota);
    let mut tags = Vec::with_capacity(lfp_quota + lfn_quota);
    for &(_, id) in &lfps[..lfp_quota] {
        chosen.push(id);
        tags.push(Tag::Lfp);
    }
    for &(_, id) in &lfns[..lfn_quota] {
        chosen.push(id);
        tags.push(Tag::Lfn);
    }
    Ok(SelectionResult {
        chosen,
        scoring_time: started.elapsed(),
        aux: SelectionAux {
            tags,
            ..SelectionAux::default()
        },
        ..SelectionResult::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{AtomSpace, FeatureMatrix, SimilarityFunction};
    use crate::rng;
    use rand::Rng;

    const JAC: usize = 9;

    fn random_features(n: usize, seed: u64) -> FeatureMatrix {
        let mut r = rng::from_seed(seed);
        FeatureMatrix::from_rows(42, (0..n).map(|_| (0..42).map(|_| r.random::<f64>()).collect())).unwrap()
    }

    #[test]
    fn jaccard_index_is_the_token_jaccard_slot() {
        assert_eq!(SimilarityFunction::TokenJaccard.index(), JAC);
    }

    #[test]
    fn quotas_split_and_rebalance() {
        let space = AtomSpace::new(2);
        let features = random_features(300, 1);
        let pool: Vec<usize> = (0..300).collect();
        let candidate = ConjunctiveRule::new(vec![space.atom(0, 2, 6), space.atom(1, 1, 4)]);
        let dnf = DnfModel::new(space, vec![]);
        let r = lfp_lfn_select(&dnf, &candidate, &features, &pool, 10).unwrap();
        assert_eq!(r.chosen.len(), 10);
        assert_eq!(r.aux.tags.iter().filter(|t| **t == Tag::Lfp).count(), 5);
        for (&id, tag) in r.chosen.iter().zip(&r.aux.tags) {
            let x = features.row(id);
            let held = candidate.atoms.iter().filter(|&&a| space.holds(a, x)).count();
            match tag {
                Tag::Lfp => assert_eq!(held, candidate.len()),
                Tag::Lfn => assert!(held + 1 >= candidate.len() && held < candidate.len()),
            }
        }
        // LFPs least similar first, LFNs most similar first
        let lfp_scores: Vec<f64> = r.chosen[..5].iter().map(|&id| agg_score(features.row(id))).collect();
        assert!(lfp_scores.windows(2).all(|w| w[0] <= w[1]));
        let lfn_scores: Vec<f64> = r.chosen[5..].iter().map(|&id| agg_score(features.row(id))).collect();
        assert!(lfn_scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn candidate_matching_nothing_yields_only_lfns() {
        let space = AtomSpace::new(2);
        let mut rows = vec![vec![0.0; 42]; 20];
        for (i, row) in rows.iter_mut().enumerate() {
            row[JAC] = 0.75;
            row[21 + JAC] = i as f64 / 40.0;
        }
        let features = FeatureMatrix::from_rows(42, rows).unwrap();
        let candidate = ConjunctiveRule::new(vec![space.atom(0, 2, 6), space.atom(1, 2, 9)]);
        let dnf = DnfModel::new(space, vec![]);
        let pool: Vec<usize> = (0..20).collect();
        let r = lfp_lfn_select(&dnf, &candidate, &features, &pool, 10).unwrap();
        assert_eq!(r.chosen.len(), 10);
        assert!(r.aux.tags.iter().all(|&t| t == Tag::Lfn));
        assert_eq!(r.chosen[0], 19);
    }

    #[test]
    fn nothing_to_find_is_an_empty_selection() {
        let space = AtomSpace::new(2);
        let features = FeatureMatrix::from_rows(42, vec![vec![0.0; 42]; 5]).unwrap();
        let candidate = ConjunctiveRule::new(vec![space.atom(0, 2, 6), space.atom(1, 2, 6)]);
        let dnf = DnfModel::new(space, vec![]);
        let r = lfp_lfn_select(&dnf, &candidate, &features, &[0, 1, 2, 3, 4], 10).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn lfns_exclude_pairs_the_dnf_already_matches() {
        let space = AtomSpace::new(2);
        let mut rows = vec![vec![0.0; 42]; 4];
        for row in rows.iter_mut() {
            row[JAC] = 0.75;
        }
        rows[0][21] = 1.0;
        let features = FeatureMatrix::from_rows(42, rows).unwrap();
        let candidate = ConjunctiveRule::new(vec![space.atom(0, 2, 6), space.atom(1, 2, 6)]);
        let dnf = DnfModel::new(space, vec![ConjunctiveRule::new(vec![space.atom(1, 0, 9)])]);
        let r = lfp_lfn_select(&dnf, &candidate, &features, &[0, 1, 2, 3], 10).unwrap();
        assert_eq!(r.chosen, vec![1, 2, 3]);
    }
}
