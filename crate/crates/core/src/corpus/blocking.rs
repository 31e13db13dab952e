use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CandidatePair, RecordTable, SchemaAlignment};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockingConfig {
    /// Minimum token Jaccard for a pair to survive.
    pub threshold: f64,
}

impl BlockingConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!("blocking threshold {threshold} outside [0, 1]")));
        }
        Ok(Self { threshold })
    }
}

impl Default for BlockingConfig {
    fn default() -> Self {
        Self { threshold: 0.1875 }
    }
}

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Jaccard similarity of two sorted, deduplicated id slices. Empty sets score 0.
pub fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    let inter = sorted_intersection_len(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub(crate) fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

struct Vocabulary(HashMap<String, u32>);

impl Vocabulary {
    fn token_set(&mut self, table: &RecordTable, columns: &[usize], record: usize) -> Vec<u32> {
        let values = &table.records[record].values;
        let mut ids: Vec<u32> = columns
            .iter()
            .filter_map(|&c| values[c].as_deref())
            .flat_map(tokenize)
            .map(|t| {
                let next = self.0.len() as u32;
                *self.0.entry(t).or_insert(next)
            })
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Keeps the record pairs whose concatenated aligned attributes have token
/// Jaccard at least `cfg.threshold`.
///
/// When both tables carry the same `table_id` the input is treated as a
/// self-join: each unordered pair is emitted once and a record is never
/// paired with itself. Output is sorted by `(left_id, right_id)` before
/// dense pair ids are assigned, so it does not depend on the worker count.
pub fn block_candidates(
    left: &RecordTable,
    right: &RecordTable,
    alignment: &SchemaAlignment,
    cfg: &BlockingConfig,
) -> Result<Vec<CandidatePair>> {
    let columns = alignment.resolve(left, right)?;
    let left_cols: Vec<usize> = columns.iter().map(|c| c.0).collect();
    let right_cols: Vec<usize> = columns.iter().map(|c| c.1).collect();
    let dedup = left.table_id == right.table_id;

    let mut vocab = Vocabulary(HashMap::new());
    let left_sets: Vec<Vec<u32>> = (0..left.len()).map(|i| vocab.token_set(left, &left_cols, i)).collect();
    let right_sets: Vec<Vec<u32>> = (0..right.len()).map(|i| vocab.token_set(right, &right_cols, i)).collect();

    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); vocab.0.len()];
    for (j, set) in right_sets.iter().enumerate() {
        for &t in set {
            postings[t as usize].push(j as u32);
        }
    }

    let threshold = cfg.threshold;
    let mut found: Vec<(usize, usize)> = (0..left.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = &left_sets[i];
            let mut hits: Vec<usize> = if threshold <= 0.0 {
                (0..right.len()).collect()
            } else {
                let mut shared: HashMap<u32, u32> = HashMap::new();
                for &t in a {
                    for &j in &postings[t as usize] {
                        *shared.entry(j).or_default() += 1;
                    }
                }
                shared
                    .into_iter()
                    .filter(|&(j, inter)| {
                        let b = &right_sets[j as usize];
                        let union = a.len() + b.len() - inter as usize;
                        inter as f64 / union as f64 >= threshold
                    })
                    .map(|(j, _)| j as usize)
                    .collect()
            };
            if dedup {
                hits.retain(|&j| j > i);
            }
            hits.into_iter().map(move |j| (i, j))
        })
        .collect();

    found.sort_unstable_by(|x, y| {
        (&left.records[x.0].id, &right.records[x.1].id).cmp(&(&left.records[y.0].id, &right.records[y.1].id))
    });

    Ok(found
        .into_iter()
        .enumerate()
        .map(|(pair_id, (i, j))| CandidatePair {
            pair_id,
            left_id: left.records[i].id.clone(),
            right_id: right.records[j].id.clone(),
            gold_label: None,
        })
        .collect())
}
