//! Local neighborhood adaptation of the query's score vector.
//!
//! Each retrieved case tells us how the backbone erred on a nearby instance:
//! the residual between its ground-truth labels and its score vector. Those
//! residuals are transferred onto the query as corrective evidence. Per
//! neighbor `i`, the adapted vector is the neighbor's scores plus a shift
//! that aligns them with the query's own output plus the neighbor's residual;
//! the terms telescope, so the similarity-weighted aggregate collapses to
//!
//! ```text
//! adapted = query_scores + Σᵢ wᵢ·(labelsᵢ − scoresᵢ) / Σᵢ wᵢ
//! ```
//!
//! which is what this module computes. The equivalence with the unfolded
//! per-neighbor form is checked by tests to 1e-9 per component.
//!
//! Adapted values are **not** clipped to [0, 1]: backbone scores may be
//! logits, and clipping would silently change downstream threshold decisions.

use alloc::string::String;
use alloc::vec::Vec;

use crate::casebase::Case;
use crate::retrieval::Neighborhood;
use crate::{Error, Result};

/// A neighbor that contributed to an adapted score vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Contributor {
    pub id: String,
    pub weight: f64,
}

/// Neighborhood-informed score estimate for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedScores {
    /// Adapted per-label scores; unbounded.
    pub values: Vec<f64>,
    /// Neighbors used, in descending-weight order.
    pub contributors: Vec<Contributor>,
}

impl AdaptedScores {
    pub fn n_used(&self) -> usize {
        self.contributors.len()
    }
}

/// Adapts the query's score vector using the top `n` usable neighbors.
///
/// Usable means similarity weight strictly greater than zero: a non-positive
/// weight would flip the residual's direction, and the weighted mean would no
/// longer be a convex combination. Exact duplicates (same embedding, scores,
/// and labels as an already selected neighbor) are skipped so that `n` counts
/// distinct retrieved situations; duplicate embeddings whose outcomes differ
/// still count separately.
///
/// `n` is deliberately independent of the neighborhood size `k`: the
/// threshold selectors consume the full neighborhood, while adaptation uses
/// only this prefix.
pub fn adapt_scores(
    query_scores: &[f32],
    neighborhood: &Neighborhood<'_>,
    n: usize,
) -> Result<AdaptedScores> {
    if neighborhood.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let label_count = neighborhood.entries()[0].case.scores.len();
    if query_scores.len() != label_count {
        return Err(Error::DimensionMismatch {
            expected: label_count,
            actual: query_scores.len(),
        });
    }

    let mut selected: Vec<&crate::retrieval::Neighbor<'_>> = Vec::new();
    for entry in neighborhood.entries() {
        if selected.len() == n {
            break;
        }
        if entry.weight <= 0.0 {
            continue;
        }
        if selected.iter().any(|s| duplicate_situation(s.case, entry.case)) {
            continue;
        }
        selected.push(entry);
    }
    if selected.is_empty() {
        return Err(Error::NoUsableNeighbors);
    }

    let weight_sum: f64 = selected.iter().map(|s| s.weight).sum();
    let mut values: Vec<f64> = query_scores.iter().map(|&s| s as f64).collect();
    for (label, value) in values.iter_mut().enumerate() {
        let mut residual = 0.0_f64;
        for s in &selected {
            residual +=
                s.weight * (s.case.labels[label] as f64 - s.case.scores[label] as f64);
        }
        *value += residual / weight_sum;
    }

    let contributors = selected
        .iter()
        .map(|s| Contributor { id: s.case.id.clone(), weight: s.weight })
        .collect();
    Ok(AdaptedScores { values, contributors })
}

fn duplicate_situation(a: &Case, b: &Case) -> bool {
    a.embedding == b.embedding && a.scores == b.scores && a.labels == b.labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::Neighbor;

    fn case(id: &str, scores: Vec<f32>, labels: Vec<u8>) -> Case {
        Case::new(id, vec![1.0, 0.0], scores, labels)
    }

    fn neighborhood<'a>(entries: Vec<Neighbor<'a>>, k: usize) -> Neighborhood<'a> {
        Neighborhood::from_entries(entries, k).unwrap()
    }

    /// Unfolded per-neighbor form: scoresᵢ + (query − scoresᵢ) + (labelsᵢ −
    /// scoresᵢ), then the similarity-weighted mean. Kept independent of the
    /// closed form in `adapt_scores`.
    fn three_term_reference(query: &[f32], used: &[(&Case, f64)]) -> Vec<f64> {
        let weight_sum: f64 = used.iter().map(|(_, w)| w).sum();
        (0..query.len())
            .map(|l| {
                let mut acc = 0.0;
                for (case, w) in used {
                    let score = case.scores[l] as f64;
                    let shift = query[l] as f64 - score;
                    let residual = case.labels[l] as f64 - score;
                    acc += w * (score + shift + residual);
                }
                acc / weight_sum
            })
            .collect()
    }

    #[test]
    fn perfectly_predicted_neighbor_changes_nothing() {
        let c = case("a", vec![1.0, 0.0, 1.0], vec![1, 0, 1]);
        let nb = neighborhood(vec![Neighbor { case: &c, weight: 1.0 }], 1);
        let adapted = adapt_scores(&[0.6, 0.2, 0.9], &nb, 1).unwrap();
        assert_eq!(adapted.values, vec![0.6_f32 as f64, 0.2_f32 as f64, 0.9_f32 as f64]);
        assert_eq!(adapted.n_used(), 1);
    }

    #[test]
    fn symmetric_residuals_cancel_exactly() {
        // Residuals +0.25 and -0.25 on every label (0.25 and 0.75 are exact
        // in f32), equal weights: the correction sums to exactly zero.
        let up = case("a", vec![0.75, 0.75], vec![1, 1]);
        let down = case("b", vec![0.25, 0.25], vec![0, 0]);
        let nb = neighborhood(
            vec![
                Neighbor { case: &up, weight: 0.5 },
                Neighbor { case: &down, weight: 0.5 },
            ],
            2,
        );
        let adapted = adapt_scores(&[0.5, 0.125], &nb, 2).unwrap();
        assert_eq!(adapted.values, vec![0.5, 0.125]);
    }

    #[test]
    fn single_neighbor_residual_transfers() {
        let c = case("a", vec![0.5, 0.3], vec![1, 0]);
        let nb = neighborhood(vec![Neighbor { case: &c, weight: 1.0 }], 1);
        let adapted = adapt_scores(&[0.6, 0.2], &nb, 1).unwrap();
        assert!((adapted.values[0] - 1.1).abs() < 1e-6, "got {:?}", adapted.values);
        assert!((adapted.values[1] + 0.1).abs() < 1e-6, "got {:?}", adapted.values);
        // Cross-check against the unfolded form.
        let reference = three_term_reference(&[0.6, 0.2], &[(&c, 1.0)]);
        for (got, want) in adapted.values.iter().zip(&reference) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_matches_three_term_form() {
        let a = case("a", vec![0.9, -0.4, 0.3], vec![1, 0, 0]);
        let b = case("b", vec![0.1, 0.6, 0.5], vec![0, 1, 1]);
        let c = case("c", vec![-1.5, 2.0, 0.0], vec![1, 1, 0]);
        let nb = neighborhood(
            vec![
                Neighbor { case: &a, weight: 0.9 },
                Neighbor { case: &b, weight: 0.55 },
                Neighbor { case: &c, weight: 0.1 },
            ],
            5,
        );
        let query = [0.25_f32, 0.5, -0.75];
        let adapted = adapt_scores(&query, &nb, 3).unwrap();
        let reference = three_term_reference(&query, &[(&a, 0.9), (&b, 0.55), (&c, 0.1)]);
        for (got, want) in adapted.values.iter().zip(&reference) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn n_limits_the_contributor_prefix() {
        let a = case("a", vec![1.0, 1.0], vec![1, 1]);
        let b = case("b", vec![0.0, 0.0], vec![1, 1]);
        let nb = neighborhood(
            vec![Neighbor { case: &a, weight: 0.8 }, Neighbor { case: &b, weight: 0.4 }],
            2,
        );
        let adapted = adapt_scores(&[0.5, 0.5], &nb, 1).unwrap();
        assert_eq!(adapted.contributors, vec![Contributor { id: "a".into(), weight: 0.8 }]);
        // Single neighbor with zero residual: values stay at the query's own.
        assert_eq!(adapted.values, vec![0.5, 0.5]);
    }

    #[test]
    fn non_positive_weights_are_filtered() {
        let a = case("a", vec![0.0, 0.0], vec![1, 1]);
        let b = case("b", vec![1.0, 1.0], vec![0, 0]);
        let nb = neighborhood(
            vec![Neighbor { case: &a, weight: 0.5 }, Neighbor { case: &b, weight: -0.2 }],
            2,
        );
        let adapted = adapt_scores(&[0.5, 0.5], &nb, 2).unwrap();
        assert_eq!(adapted.n_used(), 1);
        assert_eq!(adapted.contributors[0].id, "a");

        let all_negative = neighborhood(vec![Neighbor { case: &b, weight: -0.2 }], 2);
        assert_eq!(
            adapt_scores(&[0.5, 0.5], &all_negative, 2).unwrap_err(),
            Error::NoUsableNeighbors
        );
    }

    #[test]
    fn exact_duplicate_situations_are_skipped() {
        let a = Case::new("a", vec![1.0, 0.0], vec![0.4, 0.6], vec![0, 1]);
        let twin = Case::new("a2", vec![1.0, 0.0], vec![0.4, 0.6], vec![0, 1]);
        let distinct = Case::new("b", vec![1.0, 0.0], vec![0.4, 0.6], vec![1, 1]);
        let nb = neighborhood(
            vec![
                Neighbor { case: &a, weight: 0.9 },
                Neighbor { case: &twin, weight: 0.9 },
                Neighbor { case: &distinct, weight: 0.8 },
            ],
            3,
        );
        let adapted = adapt_scores(&[0.5, 0.5], &nb, 2).unwrap();
        let ids: Vec<_> = adapted.contributors.iter().map(|c| c.id.as_str()).collect();
        // The twin duplicates (embedding, scores, labels) of `a`; `distinct`
        // shares the embedding but has a different outcome, so it counts.
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn empty_neighborhood_is_rejected() {
        let nb = neighborhood(vec![], 3);
        assert_eq!(adapt_scores(&[0.5], &nb, 1).unwrap_err(), Error::EmptyNeighborhood);
    }

    #[test]
    fn query_dimension_is_checked() {
        let c = case("a", vec![0.5, 0.3], vec![1, 0]);
        let nb = neighborhood(vec![Neighbor { case: &c, weight: 1.0 }], 1);
        assert_eq!(
            adapt_scores(&[0.5], &nb, 1).unwrap_err(),
            Error::DimensionMismatch { expected: 2, actual: 1 }
        );
    }
}
