//! Query-by-committee: learner-agnostic bootstrap committees and the
//! forest-as-committee variant.

use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;

use super::SelectionResult;
use crate::features::FeatureSource;
use crate::learners::{class_counts, Classifier, ForestModel, LabeledExample, LearnerConfig, Model};
use crate::{rng, Error, Result};

/// `(P/C)(1 − P/C)`: 0 for a unanimous committee, 0.25 for an even split.
pub fn variance(positive_votes: usize, committee_size: usize) -> Result<f64> {
    if committee_size == 0 || positive_votes > committee_size {
        return Err(Error::invalid(format!(
            "invalid vote count {positive_votes} of {committee_size}"
        )));
    }
    let p = positive_votes as f64 / committee_size as f64;
    Ok(p * (1.0 - p))
}

/// Trains `size` models on bootstrap resamples of `labeled`. Resamples that
/// happen to contain a single class are redrawn.
pub fn bootstrap_committee(
    learner: &LearnerConfig,
    n_attributes: usize,
    labeled: &[LabeledExample<'_>],
    size: usize,
    seed: u64,
) -> Result<Vec<Model>> {
    let (pos, neg) = class_counts(labeled);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    (0..size)
        .into_par_iter()
        .map(|b| {
            let member_seed = rng::child_seed(seed, b as u64);
            let mut r = rng::from_seed(member_seed);
            let sample = loop {
                let sample: Vec<LabeledExample<'_>> =
                    (0..labeled.len()).map(|_| labeled[r.random_range(0..labeled.len())]).collect();
                let (p, n) = class_counts(&sample);
                if p > 0 && n > 0 {
                    break sample;
                }
            };
            learner.train(&sample, n_attributes, rng::child_seed(member_seed, 0))
        })
        .collect()
}

/// Ranks the pool by committee vote variance and returns the `batch` most
/// contested pairs; pairs tied at the cut are sampled uniformly.
pub fn committee_select<M, F>(committee: &[M], features: &F, pool: &[usize], batch: usize, seed: u64) -> Result<SelectionResult>
where
    M: Classifier + Sync,
    F: FeatureSource + ?Sized,
{
    if committee.is_empty() {
        return Err(Error::invalid("empty committee"));
    }
    let started = Instant::now();
    let c = committee.len();
    let scores: Vec<f64> = pool
        .par_iter()
        .map(|&id| {
            let x = features.vector(id);
            let votes = committee.iter().filter(|m| m.predict_unchecked(&x) == 1).count();
            variance(votes, c).expect("votes never exceed committee size")
        })
        .collect();
    let chosen = top_by_variance(pool, &scores, batch, seed);
    Ok(SelectionResult {
        chosen,
        scoring_time: started.elapsed(),
        ..SelectionResult::default()
    })
}

/// Highest `scores` first; the group tied at the cut is sampled with a
/// stream derived from `seed`.
fn top_by_variance(pool: &[usize], scores: &[f64], batch: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(pool[a].cmp(&pool[b])));
    if batch >= order.len() {
        return order.into_iter().map(|i| pool[i]).collect();
    }
    if batch == 0 {
        return Vec::new();
    }
    let cut = scores[order[batch - 1]];
    let above: Vec<usize> = order.iter().take_while(|&&i| scores[i] > cut).map(|&i| pool[i]).collect();
    let tied: Vec<usize> = order.iter().filter(|&&i| scores[i] == cut).map(|&i| pool[i]).collect();
    let mut r = rng::stream(seed, "qbc-ties");
    let mut picked: Vec<usize> = tied.choose_multiple(&mut r, batch - above.len()).copied().collect();
    picked.sort_unstable();
    above.into_iter().chain(picked).collect()
}

/// Learner-agnostic QBC: builds a bootstrap committee (timed as committee
/// creation) and selects by vote variance.
#[allow(clippy::too_many_arguments)]
pub fn qbc_select<F: FeatureSource + ?Sized>(
    learner: &LearnerConfig,
    n_attributes: usize,
    labeled: &[LabeledExample<'_>],
    features: &F,
    pool: &[usize],
    committee_size: usize,
    batch: usize,
    seed: u64,
) -> Result<SelectionResult> {
    if committee_size < 2 {
        return Err(Error::invalid("a committee needs at least two members"));
    }
    let started = Instant::now();
    let committee = bootstrap_committee(learner, n_attributes, labeled, committee_size, rng::stream_seed(seed, "committee"))?;
    let creation = started.elapsed();
    let mut result = committee_select(&committee, features, pool, batch, seed)?;
    result.committee_creation_time = creation;
    Ok(result)
}

/// QBC with the forest's own trees as the committee; nothing is trained here.
pub fn forest_qbc_select<F: FeatureSource + ?Sized>(
    forest: &ForestModel,
    features: &F,
    pool: &[usize],
    batch: usize,
    seed: u64,
) -> Result<SelectionResult> {
    if features.dim() != forest.dim {
        return Err(Error::DimensionMismatch {
            expected: forest.dim,
            actual: features.dim(),
        });
    }
    let mut result = committee_select(&forest.trees, features, pool, batch, seed)?;
    result.committee_creation_time = Duration::ZERO;
    Ok(result)
}
