//! Cases and the case base.
//!
//! A [`Case`] is one solved thresholding situation: the embedding `z` the
//! backbone produced for an instance, the score vector it emitted, and the
//! verified ground-truth label vector. The [`CaseBase`] is the fixed-dimension
//! collection of such cases that retrieval searches at query time. It is
//! built once from existing labeled records (no extra annotation needed) and
//! may grow incrementally as newly verified instances are retained.
//!
//! A constructed `CaseBase` is immutable for readers and safe to share across
//! threads; [`CaseBase::retain_case`] takes `&mut self`, so the single-writer
//! contract is enforced by the borrow checker.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Ordered list of label names shared by every case in a case base.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelVocab {
    names: Vec<String>,
}

impl LabelVocab {
    /// Builds a vocabulary from unique label names.
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateLabel(name.clone()));
            }
        }
        Ok(Self { names })
    }

    /// Convenience vocabulary `label_0 .. label_{count-1}` for record files
    /// that carry label vectors but no label names.
    pub fn numbered(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyInput);
        }
        let names = (0..count).map(|i| alloc::format!("label_{i}")).collect();
        Ok(Self { names })
    }

    /// Number of labels `L`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    /// Always false: construction rejects empty vocabularies.
    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Label names in index order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One stored thresholding situation.
///
/// `embedding` is kept exactly as provided (un-normalized); cosine similarity
/// is scale-invariant, so normalization happens inside the similarity
/// computation instead. `scores` may be logits, activations, or calibrated
/// probabilities — no range is assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    /// Unique identifier within a case base.
    pub id: String,
    /// Dense representation of the instance, dimension `d`.
    pub embedding: Vec<f32>,
    /// Backbone confidence scores, one per label.
    pub scores: Vec<f32>,
    /// Ground-truth label vector, entries in {0, 1}.
    pub labels: Vec<u8>,
}

impl Case {
    pub fn new(
        id: impl Into<String>,
        embedding: Vec<f32>,
        scores: Vec<f32>,
        labels: Vec<u8>,
    ) -> Self {
        Self { id: id.into(), embedding, scores, labels }
    }

    /// Number of positive labels.
    pub fn cardinality(&self) -> usize {
        self.labels.iter().filter(|&&v| v == 1).count()
    }
}

/// The retrieval corpus: all cases plus the shared dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseBase {
    dims: usize,
    vocab: LabelVocab,
    cases: Vec<Case>,
    index: BTreeMap<String, usize>,
}

impl CaseBase {
    /// Builds a case base from labeled records, inferring the embedding
    /// dimension from the first record. Records are kept in input order.
    pub fn new(vocab: LabelVocab, records: Vec<Case>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyInput)?;
        let dims = first.embedding.len();
        let mut index = BTreeMap::new();
        for (pos, case) in records.iter().enumerate() {
            validate_case(dims, vocab.len(), case)?;
            if index.insert(case.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(case.id.clone()));
            }
        }
        Ok(Self { dims, vocab, cases: records, index })
    }

    /// Appends a newly verified case. Existing cases are never touched, so
    /// the set of stored ids strictly grows.
    pub fn retain_case(&mut self, case: Case) -> Result<()> {
        validate_case(self.dims, self.vocab.len(), &case)?;
        if self.index.contains_key(&case.id) {
            return Err(Error::DuplicateId(case.id));
        }
        self.index.insert(case.id.clone(), self.cases.len());
        self.cases.push(case);
        Ok(())
    }

    /// Embedding dimension `d`.
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Label-space size `L`.
    pub fn label_count(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &LabelVocab {
        &self.vocab
    }

    /// All cases in insertion order.
    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Looks a case up by id.
    pub fn get(&self, id: &str) -> Option<&Case> {
        self.index.get(id).map(|&pos| &self.cases[pos])
    }
}

fn validate_case(dims: usize, label_count: usize, case: &Case) -> Result<()> {
    if case.embedding.len() != dims {
        return Err(Error::DimensionMismatch { expected: dims, actual: case.embedding.len() });
    }
    if case.scores.len() != label_count {
        return Err(Error::DimensionMismatch { expected: label_count, actual: case.scores.len() });
    }
    if case.labels.len() != label_count {
        return Err(Error::DimensionMismatch { expected: label_count, actual: case.labels.len() });
    }
    if let Some(&value) = case.labels.iter().find(|&&v| v > 1) {
        return Err(Error::NonBinaryLabel { id: case.id.clone(), value });
    }
    let norm_sq: f64 = case.embedding.iter().map(|&x| (x as f64) * (x as f64)).sum();
    if norm_sq == 0.0 {
        return Err(Error::ZeroNormEmbedding(case.id.clone()));
    }
    Ok(())
}
