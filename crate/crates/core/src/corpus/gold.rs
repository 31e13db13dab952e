use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CandidatePair, RecordTable};
use crate::{Error, Result};

/// Outcome of joining a gold mapping onto the post-blocking pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldReport {
    pub total_pairs: usize,
    pub gold_matches: usize,
    pub retained_matches: usize,
    /// Gold matches that blocking pruned; they are excluded from every metric.
    pub pruned_matches: usize,
    pub skew: f64,
}

/// Reads a two-column `(left_id, right_id)` mapping with a header row.
pub fn read_gold(path: &Path) -> Result<Vec<(String, String)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(file);
    let mut rows = Vec::new();
    for rec in reader.byte_records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("gold row {} has fewer than two columns", rows.len() + 1),
            });
        }
        let field = |i: usize| String::from_utf8_lossy(&rec[i]).trim().to_string();
        rows.push((field(0), field(1)));
    }
    Ok(rows)
}

/// Labels `pairs` from a gold mapping: listed pairs get 1, the rest 0.
///
/// For self-joins (same `table_id` on both sides) gold rows match in either
/// orientation.
pub fn attach_gold(
    pairs: &mut [CandidatePair],
    gold: &[(String, String)],
    left: &RecordTable,
    right: &RecordTable,
) -> Result<GoldReport> {
    let dedup = left.table_id == right.table_id;
    let mut matches: HashSet<(&str, &str)> = HashSet::with_capacity(gold.len());
    for (l, r) in gold {
        left.record(l)?;
        right.record(r)?;
        if dedup && l == r {
            continue;
        }
        matches.insert((l.as_str(), r.as_str()));
        if dedup {
            matches.insert((r.as_str(), l.as_str()));
        }
    }
    let gold_matches = if dedup {
        matches.len() / 2
    } else {
        matches.len()
    };

    let mut retained = 0;
    for p in pairs.iter_mut() {
        let hit = matches.contains(&(p.left_id.as_str(), p.right_id.as_str()));
        p.gold_label = Some(hit as u8);
        retained += hit as usize;
    }
    Ok(GoldReport {
        total_pairs: pairs.len(),
        gold_matches,
        retained_matches: retained,
        pruned_matches: gold_matches - retained,
        skew: if pairs.is_empty() {
            0.0
        } else {
            retained as f64 / pairs.len() as f64
        },
    })
}
