//! A loaded matching task: post-blocking pairs with gold labels and their
//! precomputed feature matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    attach_gold, block_candidates, read_gold, BlockingConfig, CandidatePair, GoldReport, RecordTable, SchemaAlignment,
};
use crate::features::{FeatureMatrix, FeatureSchema};
use crate::{Label, Result};

/// Record tables behind a task, kept so pairs can be shown to a human.
#[derive(Debug, Clone)]
pub struct TaskRecords {
    pub left: RecordTable,
    pub right: RecordTable,
    pub columns: Vec<(usize, usize)>,
}

/// Left and right values of one pair in alignment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairValues {
    pub left_values: Vec<Option<String>>,
    pub right_values: Vec<Option<String>>,
}

#[derive(Debug, Clone)]
pub struct MatchingTask {
    pub name: String,
    pub schema: FeatureSchema,
    pub pairs: Vec<CandidatePair>,
    pub features: FeatureMatrix,
    pub records: Option<TaskRecords>,
    pub gold_report: Option<GoldReport>,
}

impl MatchingTask {
    /// Blocks, attaches gold and featurizes two loaded tables.
    pub fn from_tables(
        name: impl Into<String>,
        left: RecordTable,
        right: RecordTable,
        alignment: &SchemaAlignment,
        gold: &[(String, String)],
        blocking: &BlockingConfig,
    ) -> Result<Self> {
        let mut pairs = block_candidates(&left, &right, alignment, blocking)?;
        let report = attach_gold(&mut pairs, gold, &left, &right)?;
        let features = FeatureMatrix::build(&pairs, &left, &right, alignment)?;
        let columns = alignment.resolve(&left, &right)?;
        Ok(Self {
            name: name.into(),
            schema: FeatureSchema::from_alignment(alignment),
            pairs,
            features,
            records: Some(TaskRecords { left, right, columns }),
            gold_report: Some(report),
        })
    }

    /// Same as [`from_tables`](Self::from_tables) with the gold mapping read from a file.
    pub fn load(
        name: impl Into<String>,
        left: RecordTable,
        right: RecordTable,
        alignment: &SchemaAlignment,
        gold_path: &Path,
        blocking: &BlockingConfig,
    ) -> Result<Self> {
        let gold = read_gold(gold_path)?;
        Self::from_tables(name, left, right, alignment, &gold, blocking)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_attributes(&self) -> usize {
        self.schema.attributes.len()
    }

    pub fn gold_labels(&self) -> Vec<Option<Label>> {
        self.pairs.iter().map(|p| p.gold_label).collect()
    }

    pub fn pair_values(&self, pair_id: usize) -> Option<PairValues> {
        let pair = self.pairs.get(pair_id)?;
        let Some(records) = &self.records else {
            let n = self.n_attributes();
            return Some(PairValues {
                left_values: vec![None; n],
                right_values: vec![None; n],
            });
        };
        let l = records.left.record(&pair.left_id).ok()?;
        let r = records.right.record(&pair.right_id).ok()?;
        Some(PairValues {
            left_values: records.columns.iter().map(|&(lc, _)| l.values[lc].clone()).collect(),
            right_values: records.columns.iter().map(|&(_, rc)| r.values[rc].clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;
    use crate::features::tests::tables;

    #[test]
    fn builds_from_tables() {
        let (left, right, alignment, _) = tables();
        let gold = vec![(left.records[0].id.clone(), right.records[0].id.clone())];
        let task = MatchingTask::from_tables("t", left, right, &alignment, &gold, &BlockingConfig::new(0.0).unwrap())
            .unwrap();
        assert_eq!(task.features.len(), task.len());
        assert_eq!(task.features.dim(), 63);
        assert_eq!(task.gold_report.as_ref().unwrap().retained_matches, 1);
        let v = task.pair_values(0).unwrap();
        assert_eq!(v.left_values.len(), 3);
        assert!(task.pair_values(task.len()).is_none());
    }
}
