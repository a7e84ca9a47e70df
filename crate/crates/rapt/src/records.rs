//! Line-delimited JSON dataset records.
//!
//! One object per line: `{"id": ..., "embedding": [...], "scores": [...],
//! "labels": [...]}`. The `labels` field may be absent for query files used
//! in prediction-only mode. Every line of a file must agree on the embedding
//! dimension and the label-space size.

use std::fs;
use std::path::Path;

use rapt_core::Case;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One dataset record as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub embedding: Vec<f32>,
    pub scores: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
}

impl Record {
    pub fn from_case(case: &Case) -> Self {
        Self {
            id: case.id.clone(),
            embedding: case.embedding.clone(),
            scores: case.scores.clone(),
            labels: Some(case.labels.clone()),
        }
    }

    /// Converts to a case; labeled records only.
    pub fn into_case(self) -> Result<Case, Error> {
        let labels = self.labels.ok_or_else(|| Error::MissingLabels(self.id.clone()))?;
        Ok(Case::new(self.id, self.embedding, self.scores, labels))
    }
}

/// Reads a record file, reporting the line number of the first malformed
/// line and enforcing dimension consistency across lines.
pub fn read_records(path: &Path) -> Result<Vec<Record>, Error> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut records = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: index + 1,
            message: e.to_string(),
        })?;
        let label_count = record.labels.as_ref().map_or(record.scores.len(), Vec::len);
        if record.scores.len() != label_count {
            return Err(rapt_core::Error::DimensionMismatch {
                expected: label_count,
                actual: record.scores.len(),
            }
            .into());
        }
        match dims {
            None => dims = Some((record.embedding.len(), record.scores.len())),
            Some((d, l)) => {
                if record.embedding.len() != d {
                    return Err(rapt_core::Error::DimensionMismatch {
                        expected: d,
                        actual: record.embedding.len(),
                    }
                    .into());
                }
                if record.scores.len() != l {
                    return Err(rapt_core::Error::DimensionMismatch {
                        expected: l,
                        actual: record.scores.len(),
                    }
                    .into());
                }
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records, one JSON object per line.
pub fn write_records(path: &Path, records: &[Record]) -> Result<(), Error> {
    let mut out = String::new();
    for record in records {
        // Serialization of a plain struct cannot fail.
        out.push_str(&serde_json::to_string(record).expect("record serialization"));
        out.push('\n');
    }
    fs::write(path, out).map_err(Error::io(path))
}

/// Converts labeled records into cases, preserving order.
pub fn to_cases(records: Vec<Record>) -> Result<Vec<Case>, Error> {
    records.into_iter().map(Record::into_case).collect()
}
