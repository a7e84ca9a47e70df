//! Cosine-similarity retrieval over the case base.
//!
//! Retrieval is a brute-force exact scan: at the scales the case base is
//! meant for this stays tractable, and the math remains auditable against an
//! exhaustive sort. The similarity of each retrieved neighbor doubles as its
//! importance weight downstream.

use alloc::vec::Vec;

use crate::casebase::{Case, CaseBase};
use crate::{Error, Result};

/// One retrieved case with its similarity weight.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub case: &'a Case,
    /// Cosine similarity between the query and this case, in [-1, 1].
    pub weight: f64,
}

/// The top-k retrieved cases, sorted by non-increasing weight.
///
/// Ties in similarity are broken by smaller case-base insertion index, so a
/// retrieval is a deterministic function of its inputs.
#[derive(Debug, Clone)]
pub struct Neighborhood<'a> {
    entries: Vec<Neighbor<'a>>,
    k_requested: usize,
}

impl<'a> Neighborhood<'a> {
    /// Assembles a neighborhood from pre-sorted entries. Intended for tests
    /// and for callers that rank cases themselves; [`retrieve_top_k`] is the
    /// normal constructor.
    pub fn from_entries(entries: Vec<Neighbor<'a>>, k_requested: usize) -> Result<Self> {
        if k_requested == 0 {
            return Err(Error::EmptyNeighborhood);
        }
        if entries.len() > k_requested {
            return Err(Error::ShapeMismatch { expected: k_requested, actual: entries.len() });
        }
        if entries.windows(2).any(|w| w[0].weight < w[1].weight) {
            return Err(Error::UnsortedNeighborhood);
        }
        Ok(Self { entries, k_requested })
    }

    pub fn entries(&self) -> &[Neighbor<'a>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `k` that was asked for; `len()` may be smaller on small bases.
    pub fn k_requested(&self) -> usize {
        self.k_requested
    }
}

/// Cosine similarity `⟨a,b⟩ / (‖a‖‖b‖)`, clamped to [-1, 1] against floating
/// rounding. Accumulation happens in f64.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let mut dot = 0.0_f64;
    let mut norm_a = 0.0_f64;
    let mut norm_b = 0.0_f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    Ok((dot / (libm::sqrt(norm_a) * libm::sqrt(norm_b))).clamp(-1.0, 1.0))
}

/// Retrieves the `min(k, |cb|)` cases most similar to `query`, highest first.
pub fn retrieve_top_k<'a>(cb: &'a CaseBase, query: &[f32], k: usize) -> Result<Neighborhood<'a>> {
    retrieve_top_k_excluding(cb, query, k, None)
}

/// Like [`retrieve_top_k`], but skips the case whose id equals `exclude_id`.
/// Used at evaluation time so a query stored in the case base never retrieves
/// itself.
pub fn retrieve_top_k_excluding<'a>(
    cb: &'a CaseBase,
    query: &[f32],
    k: usize,
    exclude_id: Option<&str>,
) -> Result<Neighborhood<'a>> {
    if k == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    if query.len() != cb.dims() {
        return Err(Error::DimensionMismatch { expected: cb.dims(), actual: query.len() });
    }
    let query_norm_sq: f64 = query.iter().map(|&x| (x as f64) * (x as f64)).sum();
    if query_norm_sq == 0.0 {
        return Err(Error::ZeroNormVector);
    }

    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(cb.len());
    for (pos, case) in cb.cases().iter().enumerate() {
        if exclude_id == Some(case.id.as_str()) {
            continue;
        }
        ranked.push((pos, cosine_similarity(query, &case.embedding)?));
    }
    if ranked.is_empty() {
        return Err(Error::EmptyCaseBase);
    }
    // Descending weight, ties by insertion index. The comparator is a total
    // order, so the unstable sort is still deterministic.
    ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k.min(ranked.len()));

    let entries = ranked
        .into_iter()
        .map(|(pos, weight)| Neighbor { case: &cb.cases()[pos], weight })
        .collect();
    Ok(Neighborhood { entries, k_requested: k })
}
