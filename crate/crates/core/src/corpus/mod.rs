//! Record tables, offline Jaccard blocking, gold mappings and train/test splits.

mod blocking;
mod gold;
mod split;
mod table;

pub use blocking::{block_candidates, jaccard, tokenize, BlockingConfig};
pub(crate) use blocking::sorted_intersection_len;
pub use gold::{attach_gold, read_gold, GoldReport};
pub use split::{split, Split, SplitMode, SplitSpec};
pub use table::{load_table, load_tables, Record, RecordTable, SchemaAlignment};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

/// A record pair that survived blocking. `pair_id`s are dense `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub pair_id: usize,
    pub left_id: String,
    pub right_id: String,
    pub gold_label: Option<Label>,
}

/// Fraction of gold matches among `pairs`. Unlabelled pairs count as non-matches.
pub fn class_skew(pairs: &[CandidatePair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let matches = pairs.iter().filter(|p| p.gold_label == Some(1)).count();
    matches as f64 / pairs.len() as f64
}

/// Writes `pair_id,left_id,right_id,gold_label` rows.
pub fn write_pairs(path: &Path, pairs: &[CandidatePair]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pair_id", "left_id", "right_id", "gold_label"])?;
    for p in pairs {
        let gold = p.gold_label.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([p.pair_id.to_string(), p.left_id.clone(), p.right_id.clone(), gold])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the output of [`write_pairs`], checking that ids are dense and
/// `(left_id, right_id)` is unique.
pub fn read_pairs(path: &Path) -> Result<Vec<CandidatePair>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        if rec.len() != 4 {
            return Err(parse_err(format!("row {}: expected 4 fields", row + 1)));
        }
        let pair_id: usize = rec[0]
            .parse()
            .map_err(|_| parse_err(format!("row {}: bad pair_id", row + 1)))?;
        if pair_id != row {
            return Err(parse_err(format!("row {}: pair ids are not dense", row + 1)));
        }
        let gold_label = match &rec[3] {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => return Err(parse_err(format!("row {}: bad label `{other}`", row + 1))),
        };
        if !seen.insert((rec[1].to_string(), rec[2].to_string())) {
            return Err(parse_err(format!("row {}: duplicate record pair", row + 1)));
        }
        pairs.push(CandidatePair {
            pair_id,
            left_id: rec[1].to_string(),
            right_id: rec[2].to_string(),
            gold_label,
        });
    }
    Ok(pairs)
}
