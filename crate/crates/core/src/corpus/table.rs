use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    /// One slot per table attribute; `None` is a missing value.
    pub values: Vec<Option<String>>,
}

/// A relation with a designated id column. The id column itself is not part
/// of `attributes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordTable {
    pub table_id: String,
    pub attributes: Vec<String>,
    pub records: Vec<Record>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl RecordTable {
    pub fn new(table_id: impl Into<String>, attributes: Vec<String>, records: Vec<Record>) -> Result<Self> {
        let table_id = table_id.into();
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.values.len() != attributes.len() {
                return Err(Error::invalid(format!(
                    "table {table_id}: record `{}` has {} values, expected {}",
                    r.id,
                    r.values.len(),
                    attributes.len()
                )));
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateRecordId {
                    table: table_id,
                    id: r.id.clone(),
                });
            }
        }
        Ok(Self {
            table_id,
            attributes,
            records,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn record(&self, id: &str) -> Result<&Record> {
        self.position(id)
            .map(|i| &self.records[i])
            .ok_or_else(|| Error::UnknownRecord {
                table: self.table_id.clone(),
                id: id.to_string(),
            })
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }
}

/// Ordered list of `(left_attr, right_attr)` pairs to compare.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaAlignment {
    pub pairs: Vec<(String, String)>,
}

impl SchemaAlignment {
    pub fn new(pairs: Vec<(String, String)>) -> Self {
        Self { pairs }
    }

    /// Same attribute names on both sides.
    pub fn identity<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            pairs: names
                .iter()
                .map(|n| (n.as_ref().to_string(), n.as_ref().to_string()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Resolves attribute names to column positions, failing on any absent name.
    pub fn resolve(&self, left: &RecordTable, right: &RecordTable) -> Result<Vec<(usize, usize)>> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("schema alignment is empty"));
        }
        self.pairs
            .iter()
            .map(|(l, r)| {
                let li = left.attribute_index(l).ok_or_else(|| Error::UnknownAttribute {
                    table: left.table_id.clone(),
                    attribute: l.clone(),
                })?;
                let ri = right.attribute_index(r).ok_or_else(|| Error::UnknownAttribute {
                    table: right.table_id.clone(),
                    attribute: r.clone(),
                })?;
                Ok((li, ri))
            })
            .collect()
    }

    /// Display label of the i-th aligned pair: `name`, or `left/right` when the names differ.
    pub fn label(&self, i: usize) -> String {
        let (l, r) = &self.pairs[i];
        if l == r {
            l.clone()
        } else {
            format!("{l}/{r}")
        }
    }
}

/// Loads a comma-separated table with a header row. Empty fields become `None`.
/// Bytes that are not valid UTF-8 are replaced rather than rejected, since
/// several public EM datasets ship in Latin-1.
pub fn load_table(path: &Path, id_column: &str) -> Result<RecordTable> {
    let table_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let header: Vec<String> = reader
        .byte_headers()?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let id_pos = header
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| Error::MissingIdColumn {
            table: table_id.clone(),
            column: id_column.to_string(),
        })?;
    let attributes: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_pos)
        .map(|(_, h)| h.clone())
        .collect();

    let mut records = Vec::new();
    for rec in reader.byte_records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut id = String::new();
        let mut values = Vec::with_capacity(attributes.len());
        for (i, field) in rec.iter().enumerate() {
            let text = String::from_utf8_lossy(field);
            let text = text.trim();
            if i == id_pos {
                id = text.to_string();
            } else if text.is_empty() {
                values.push(None);
            } else {
                values.push(Some(text.to_string()));
            }
        }
        records.push(Record { id, values });
    }
    RecordTable::new(table_id, attributes, records)
}

/// Loads both sides and validates the alignment against them. When both
/// paths are the same file the right table is a clone of the left, which is
/// how self-join (deduplication) datasets are expressed.
pub fn load_tables(
    left_path: &Path,
    right_path: &Path,
    left_id: &str,
    right_id: &str,
    alignment: SchemaAlignment,
) -> Result<(RecordTable, RecordTable, SchemaAlignment)> {
    let left = load_table(left_path, left_id)?;
    let right = if left_path == right_path && left_id == right_id {
        left.clone()
    } else {
        load_table(right_path, right_id)?
    };
    alignment.resolve(&left, &right)?;
    Ok((left, right, alignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_with_nulls_and_quotes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "abt.csv",
            "id,name,description,price\n1,\"sony, tv\",,$10\n2,lamp,bright lamp,\n",
        );
        let t = load_table(&p, "id").unwrap();
        assert_eq!(t.table_id, "abt");
        assert_eq!(t.attributes, vec!["name", "description", "price"]);
        assert_eq!(t.records[0].values, vec![Some("sony, tv".into()), None, Some("$10".into())]);
        assert_eq!(t.records[1].values[2], None);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "id,name\n1,a\n1,b\n");
        assert!(matches!(load_table(&p, "id"), Err(Error::DuplicateRecordId { .. })));
    }

    #[test]
    fn missing_id_column_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "key,name\n1,a\n");
        assert!(matches!(load_table(&p, "id"), Err(Error::MissingIdColumn { .. })));
    }

    #[test]
    fn alignment_with_absent_attribute_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let l = write(dir.path(), "l.csv", "id,name\n1,a\n");
        let r = write(dir.path(), "r.csv", "id,title\n1,a\n");
        let err = load_tables(&l, &r, "id", "id", SchemaAlignment::identity(&["name"])).unwrap_err();
        assert!(matches!(err, Error::UnknownAttribute { ref attribute, .. } if attribute == "name"));
        let ok = load_tables(&l, &r, "id", "id", SchemaAlignment::new(vec![("name".into(), "title".into())]));
        assert!(ok.is_ok());
    }

    #[test]
    fn self_join_shares_table_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "cora.csv", "id,title\n1,a\n2,b\n");
        let (l, r, _) = load_tables(&p, &p, "id", "id", SchemaAlignment::identity(&["title"])).unwrap();
        assert_eq!(l.table_id, r.table_id);
    }
}
