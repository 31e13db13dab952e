//! Similarity feature vectors and Boolean threshold atoms.
//!
//! A pair's feature vector holds one value per `(aligned attribute pair,
//! similarity function)`, laid out attribute-major: dimension
//! `attr * 21 + function.index()`.

mod atoms;
mod similarity;

pub use atoms::{booleanize, AtomId, AtomSpace, BooleanFeatureVector, ATOM_THRESHOLDS, RULE_FUNCTIONS};
pub use similarity::{similarity, PreparedValue, SimilarityFunction};

use std::borrow::Cow;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CandidatePair, RecordTable, SchemaAlignment};
use crate::{Error, Result};

/// Names the dimensions of a feature space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    /// Display label per aligned attribute pair.
    pub attributes: Vec<String>,
}

impl FeatureSchema {
    pub fn new(attributes: Vec<String>) -> Self {
        Self { attributes }
    }

    pub fn from_alignment(alignment: &SchemaAlignment) -> Self {
        Self::new((0..alignment.len()).map(|i| alignment.label(i)).collect())
    }

    pub fn dim(&self) -> usize {
        self.attributes.len() * SimilarityFunction::COUNT
    }

    pub fn index(attr: usize, function: SimilarityFunction) -> usize {
        attr * SimilarityFunction::COUNT + function.index()
    }

    pub fn locate(&self, dim: usize) -> (usize, SimilarityFunction) {
        (dim / SimilarityFunction::COUNT, SimilarityFunction::ALL[dim % SimilarityFunction::COUNT])
    }

    /// e.g. `JaccardSim(name)`.
    pub fn dimension_name(&self, dim: usize) -> String {
        let (attr, f) = self.locate(dim);
        format!("{}({})", f.name(), self.attributes[attr])
    }

    pub fn atoms(&self) -> AtomSpace {
        AtomSpace::new(self.attributes.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub pair_id: usize,
    pub values: Vec<f64>,
}

/// Computes the full similarity vector of one candidate pair.
pub fn featurize(
    pair: &CandidatePair,
    left: &RecordTable,
    right: &RecordTable,
    alignment: &SchemaAlignment,
) -> Result<FeatureVector> {
    let columns = alignment.resolve(left, right)?;
    featurize_resolved(pair, left, right, &columns)
}

fn featurize_resolved(
    pair: &CandidatePair,
    left: &RecordTable,
    right: &RecordTable,
    columns: &[(usize, usize)],
) -> Result<FeatureVector> {
    let l = left.record(&pair.left_id)?;
    let r = right.record(&pair.right_id)?;
    let mut values = Vec::with_capacity(columns.len() * SimilarityFunction::COUNT);
    for &(lc, rc) in columns {
        match (l.values[lc].as_deref(), r.values[rc].as_deref()) {
            (Some(a), Some(b)) => {
                let (pa, pb) = (PreparedValue::new(a), PreparedValue::new(b));
                values.extend(SimilarityFunction::ALL.iter().map(|&f| pa.score(f, &pb)));
            }
            _ => values.extend(std::iter::repeat_n(0.0, SimilarityFunction::COUNT)),
        }
    }
    Ok(FeatureVector {
        pair_id: pair.pair_id,
        values,
    })
}

/// Random access to feature values by pair id.
pub trait FeatureSource: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// One dimension of one pair.
    fn value(&self, pair_id: usize, dim: usize) -> f64;
    /// The whole vector of one pair.
    fn vector(&self, pair_id: usize) -> Cow<'_, [f64]>;
}

/// Dense, precomputed feature vectors indexed by pair id. This is the
/// memoized form every learner trains and predicts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let mut data = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(Self { dim, data })
    }

    /// Featurizes every pair (in parallel). `pairs[i].pair_id` must equal `i`.
    pub fn build(
        pairs: &[CandidatePair],
        left: &RecordTable,
        right: &RecordTable,
        alignment: &SchemaAlignment,
    ) -> Result<Self> {
        let columns = alignment.resolve(left, right)?;
        let dim = columns.len() * SimilarityFunction::COUNT;
        let rows: Vec<Vec<f64>> = pairs
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                if p.pair_id != i {
                    return Err(Error::invalid(format!("pair ids are not dense at position {i}")));
                }
                featurize_resolved(p, left, right, &columns).map(|fv| fv.values)
            })
            .collect::<Result<_>>()?;
        Self::from_rows(dim, rows)
    }

    pub fn row(&self, pair_id: usize) -> &[f64] {
        &self.data[pair_id * self.dim..(pair_id + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Writes `pair_id` followed by one column per dimension.
    pub fn export_csv(&self, path: &Path, schema: &FeatureSchema) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "pair_id").map_err(io)?;
        for d in 0..self.dim {
            write!(w, ",\"{}\"", schema.dimension_name(d)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for (i, row) in self.rows().enumerate() {
            write!(w, "{i}").map_err(io)?;
            for v in row {
                write!(w, ",{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

impl FeatureSource for FeatureMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    fn value(&self, pair_id: usize, dim: usize) -> f64 {
        self.data[pair_id * self.dim + dim]
    }

    fn vector(&self, pair_id: usize) -> Cow<'_, [f64]> {
        Cow::Borrowed(self.row(pair_id))
    }
}

/// Computes features on demand from the record tables, counting how many
/// single values and whole vectors were evaluated.
pub struct LazyFeatures<'a> {
    pairs: &'a [CandidatePair],
    left: &'a RecordTable,
    right: &'a RecordTable,
    columns: Vec<(usize, usize)>,
    values_evaluated: AtomicUsize,
    vectors_built: AtomicUsize,
}

impl<'a> LazyFeatures<'a> {
    pub fn new(
        pairs: &'a [CandidatePair],
        left: &'a RecordTable,
        right: &'a RecordTable,
        alignment: &SchemaAlignment,
    ) -> Result<Self> {
        Ok(Self {
            pairs,
            left,
            right,
            columns: alignment.resolve(left, right)?,
            values_evaluated: AtomicUsize::new(0),
            vectors_built: AtomicUsize::new(0),
        })
    }

    pub fn values_evaluated(&self) -> usize {
        self.values_evaluated.load(Ordering::Relaxed)
    }

    pub fn vectors_built(&self) -> usize {
        self.vectors_built.load(Ordering::Relaxed)
    }
}

impl FeatureSource for LazyFeatures<'_> {
    fn dim(&self) -> usize {
        self.columns.len() * SimilarityFunction::COUNT
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn value(&self, pair_id: usize, dim: usize) -> f64 {
        self.values_evaluated.fetch_add(1, Ordering::Relaxed);
        let pair = &self.pairs[pair_id];
        let (attr, f) = (dim / SimilarityFunction::COUNT, SimilarityFunction::ALL[dim % SimilarityFunction::COUNT]);
        let (lc, rc) = self.columns[attr];
        let l = &self.left.records[self.left.position(&pair.left_id).expect("pair references loaded record")];
        let r = &self.right.records[self.right.position(&pair.right_id).expect("pair references loaded record")];
        similarity(f, l.values[lc].as_deref(), r.values[rc].as_deref())
    }

    fn vector(&self, pair_id: usize) -> Cow<'_, [f64]> {
        self.vectors_built.fetch_add(1, Ordering::Relaxed);
        let fv = featurize_resolved(&self.pairs[pair_id], self.left, self.right, &self.columns)
            .expect("pair references loaded record");
        Cow::Owned(fv.values)
    }
}
