//! Score-to-label-set conversion.
//!
//! Everything funnels through the same element-wise indicator rule: a label
//! is selected iff its score is **strictly** greater than its threshold. What
//! differs between strategies is where the threshold comes from:
//!
//! * [`ThresholdStrategy::Fixed`] — a constant, classically 0.5;
//! * [`ThresholdStrategy::GlobalTuned`] — one constant tuned on validation
//!   rows by [`tune_global_threshold`];
//! * [`ThresholdStrategy::LabelwiseTuned`] — per-label constants from
//!   [`tune_labelwise_thresholds`];
//! * [`ThresholdStrategy::AvgCount`] — per-query cut placed so the number of
//!   selected labels equals the floored similarity-weighted mean of the
//!   neighbors' label cardinalities;
//! * [`ThresholdStrategy::RankCal`] — per-query threshold equal to the
//!   similarity-weighted mean of each neighbor's lowest score among its
//!   positive labels (the cheapest score that was still a relevant label).

use alloc::string::String;
use alloc::vec::Vec;

use crate::adaptation::{AdaptedScores, Contributor};
use crate::retrieval::Neighborhood;
use crate::{Error, Result};

/// Margin placed beyond the extreme score for all-or-nothing cuts and for
/// the ends of tuning candidate grids.
pub const EDGE_MARGIN: f64 = 1e-6;

/// Threshold sentinel for labels that can never be predicted (no positive
/// support during tuning). Large enough to sit above any real score while
/// still serializing as a finite JSON number.
pub const NEVER_PREDICT: f64 = f64::MAX;

/// How a score vector is converted into a label set.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdStrategy {
    /// Fixed global threshold.
    Fixed(f64),
    /// Globally tuned threshold (carries the tuned value).
    GlobalTuned(f64),
    /// Per-label tuned thresholds, one per label.
    LabelwiseTuned(Vec<f64>),
    /// Dynamic: neighborhood label-cardinality cut.
    AvgCount,
    /// Dynamic: neighborhood rank calibration.
    RankCal,
}

/// Scalar or per-label threshold actually applied to a score vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Tau {
    Scalar(f64),
    PerLabel(Vec<f64>),
}

/// Final decision for one query.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    /// Query identifier.
    pub id: String,
    /// Scores the threshold was applied to (adapted for dynamic strategies,
    /// raw backbone scores for static ones).
    pub adapted_scores: Vec<f64>,
    /// Threshold(s) applied.
    pub tau: Tau,
    /// Selected label set, entries in {0, 1}.
    pub labels: Vec<u8>,
    /// Neighbors that informed this prediction; empty for static strategies.
    pub provenance: Vec<Contributor>,
}

/// Element-wise indicator: `out[l] = 1` iff `scores[l] > tau[l]`, with strict
/// inequality.
pub fn apply_threshold(scores: &[f64], tau: &Tau) -> Result<Vec<u8>> {
    match tau {
        Tau::Scalar(t) => Ok(scores.iter().map(|&s| u8::from(s > *t)).collect()),
        Tau::PerLabel(ts) => {
            if ts.len() != scores.len() {
                return Err(Error::DimensionMismatch {
                    expected: scores.len(),
                    actual: ts.len(),
                });
            }
            Ok(scores.iter().zip(ts.iter()).map(|(&s, &t)| u8::from(s > t)).collect())
        }
    }
}

/// Builds a prediction by applying a precomputed static threshold.
pub fn threshold_select(id: &str, scores: &[f64], tau: Tau) -> Result<Prediction> {
    let labels = apply_threshold(scores, &tau)?;
    Ok(Prediction {
        id: String::from(id),
        adapted_scores: scores.to_vec(),
        tau,
        labels,
        provenance: Vec::new(),
    })
}

/// Similarity-weighted mean of the neighbors' label cardinalities: the
/// neighborhood's estimate of how many labels are active for queries in this
/// region of the embedding space.
///
/// Only positive-weight neighbors participate; with none, there is no
/// cardinality evidence to average.
pub fn expected_cardinality(neighborhood: &Neighborhood<'_>) -> Result<f64> {
    let mut numerator = 0.0_f64;
    let mut denominator = 0.0_f64;
    for entry in neighborhood.entries() {
        if entry.weight <= 0.0 {
            continue;
        }
        numerator += entry.weight * entry.case.cardinality() as f64;
        denominator += entry.weight;
    }
    if denominator == 0.0 {
        return Err(Error::NoUsableNeighbors);
    }
    Ok(numerator / denominator)
}

/// Cardinality-cut selection: keep exactly `⌊k*⌋` labels (for pairwise
/// distinct adapted scores), where `k*` is [`expected_cardinality`].
///
/// The cut is the midpoint of the `⌊k*⌋`-th and `(⌊k*⌋+1)`-th largest adapted
/// scores; for `⌊k*⌋ = 0` or `⌊k*⌋ ≥ L` the threshold sits [`EDGE_MARGIN`]
/// beyond the extreme score. If several adapted scores tie exactly at the
/// cut, the strict indicator may select fewer than `⌊k*⌋` labels; that is
/// accepted rather than perturbing scores.
pub fn avgcount_select(
    id: &str,
    adapted: &AdaptedScores,
    neighborhood: &Neighborhood<'_>,
) -> Result<Prediction> {
    let values = &adapted.values;
    if values.is_empty() {
        return Err(Error::ShapeMismatch { expected: 1, actual: 0 });
    }
    let k_star = expected_cardinality(neighborhood)?;
    let target = libm::floor(k_star) as usize;

    let tau = if target == 0 {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + EDGE_MARGIN
    } else if target >= values.len() {
        values.iter().copied().fold(f64::INFINITY, f64::min) - EDGE_MARGIN
    } else {
        let mut sorted = values.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        (sorted[target - 1] + sorted[target]) / 2.0
    };

    let tau = Tau::Scalar(tau);
    let labels = apply_threshold(values, &tau)?;
    Ok(Prediction {
        id: String::from(id),
        adapted_scores: values.clone(),
        tau,
        labels,
        provenance: adapted.contributors.clone(),
    })
}

/// Rank-calibration threshold: the similarity-weighted mean, over
/// positive-weight neighbors that have at least one positive label, of each
/// neighbor's minimum score among its positive labels.
///
/// Neighbors with no positive labels carry no boundary evidence and are
/// excluded from both numerator and denominator; if no neighbor contributes,
/// `fallback_tau` is returned. A single contributing neighbor yields its
/// boundary exactly.
pub fn rankcal_tau(neighborhood: &Neighborhood<'_>, fallback_tau: f64) -> Result<f64> {
    if neighborhood.is_empty() {
        return Err(Error::NoUsableNeighbors);
    }
    let mut boundaries: Vec<(f64, f64)> = Vec::new();
    for entry in neighborhood.entries() {
        if entry.weight <= 0.0 {
            continue;
        }
        let mut boundary = f64::INFINITY;
        for (score, label) in entry.case.scores.iter().zip(entry.case.labels.iter()) {
            if *label == 1 {
                boundary = boundary.min(*score as f64);
            }
        }
        if boundary.is_finite() {
            boundaries.push((entry.weight, boundary));
        }
    }
    match boundaries.as_slice() {
        [] => Ok(fallback_tau),
        [(_, boundary)] => Ok(*boundary),
        _ => {
            let mut numerator = 0.0_f64;
            let mut denominator = 0.0_f64;
            for (weight, boundary) in &boundaries {
                numerator += weight * boundary;
                denominator += weight;
            }
            Ok(numerator / denominator)
        }
    }
}

/// Rank-calibration selection over adapted scores.
pub fn rankcal_select(
    id: &str,
    adapted: &AdaptedScores,
    neighborhood: &Neighborhood<'_>,
    fallback_tau: f64,
) -> Result<Prediction> {
    let tau = Tau::Scalar(rankcal_tau(neighborhood, fallback_tau)?);
    let labels = apply_threshold(&adapted.values, &tau)?;
    Ok(Prediction {
        id: String::from(id),
        adapted_scores: adapted.values.clone(),
        tau,
        labels,
        provenance: adapted.contributors.clone(),
    })
}

/// Tunes one global threshold on validation rows, maximizing micro-F1.
///
/// The objective is piecewise constant in the threshold, with breakpoints
/// only at observed scores, so scanning the finite candidate grid — one
/// point below the minimum score, the midpoints of consecutive distinct
/// pooled scores, and one point above the maximum — is exact. Ties go to the
/// smallest candidate.
pub fn tune_global_threshold(scores: &[Vec<f32>], labels: &[Vec<u8>]) -> Result<f64> {
    let cells = pool_cells(scores, labels, None)?;
    Ok(sweep_best_tau(cells))
}

/// Tunes one threshold per label, each maximizing that label's binary F1 on
/// its own score column. Labels with no positive support in the validation
/// rows receive [`NEVER_PREDICT`]: any finite threshold scores F1 = 0 for
/// them anyway, and never predicting avoids spurious positives.
pub fn tune_labelwise_thresholds(scores: &[Vec<f32>], labels: &[Vec<u8>]) -> Result<Vec<f64>> {
    let label_count = validate_rows(scores, labels)?;
    let mut taus = Vec::with_capacity(label_count);
    for label in 0..label_count {
        let cells = pool_cells(scores, labels, Some(label))?;
        if cells.iter().all(|&(_, positive)| !positive) {
            taus.push(NEVER_PREDICT);
        } else {
            taus.push(sweep_best_tau(cells));
        }
    }
    Ok(taus)
}

fn validate_rows(scores: &[Vec<f32>], labels: &[Vec<u8>]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch { expected: scores.len(), actual: labels.len() });
    }
    let label_count = scores[0].len();
    for (row_scores, row_labels) in scores.iter().zip(labels.iter()) {
        if row_scores.len() != label_count {
            return Err(Error::ShapeMismatch { expected: label_count, actual: row_scores.len() });
        }
        if row_labels.len() != label_count {
            return Err(Error::ShapeMismatch { expected: label_count, actual: row_labels.len() });
        }
        if let Some(&value) = row_labels.iter().find(|&&v| v > 1) {
            return Err(Error::NonBinaryEntry(value));
        }
    }
    Ok(label_count)
}

/// Flattens rows into (score, is-positive) cells, optionally restricted to
/// one label column, sorted by descending score.
fn pool_cells(
    scores: &[Vec<f32>],
    labels: &[Vec<u8>],
    only_label: Option<usize>,
) -> Result<Vec<(f64, bool)>> {
    let label_count = validate_rows(scores, labels)?;
    let mut cells = Vec::new();
    for (row_scores, row_labels) in scores.iter().zip(labels.iter()) {
        for label in 0..label_count {
            if only_label.is_some_and(|l| l != label) {
                continue;
            }
            cells.push((row_scores[label] as f64, row_labels[label] == 1));
        }
    }
    cells.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    Ok(cells)
}

/// Single descending pass over the candidate grid. As the threshold drops
/// past each distinct score, the cells at that score flip to predicted;
/// F1 = 2·TP / (predicted + positives), with 0/0 defined as 0. Scanning from
/// the largest candidate down and replacing on `>=` leaves the smallest
/// maximizer.
fn sweep_best_tau(cells: Vec<(f64, bool)>) -> f64 {
    debug_assert!(!cells.is_empty());
    let total_pos = cells.iter().filter(|&&(_, positive)| positive).count();

    // Above-max candidate: nothing predicted.
    let mut best_tau = cells[0].0 + EDGE_MARGIN;
    let mut best_f1 = 0.0_f64;

    let mut true_pos = 0_usize;
    let mut predicted = 0_usize;
    let mut i = 0;
    while i < cells.len() {
        let score = cells[i].0;
        while i < cells.len() && cells[i].0 == score {
            true_pos += usize::from(cells[i].1);
            predicted += 1;
            i += 1;
        }
        let tau = if i < cells.len() {
            (score + cells[i].0) / 2.0
        } else {
            score - EDGE_MARGIN
        };
        let denominator = predicted + total_pos;
        let f1 = if denominator == 0 { 0.0 } else { 2.0 * true_pos as f64 / denominator as f64 };
        if f1 >= best_f1 {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    best_tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casebase::Case;
    use crate::retrieval::{Neighbor, Neighborhood};

    fn adapted(values: Vec<f64>) -> AdaptedScores {
        AdaptedScores { values, contributors: Vec::new() }
    }

    fn case_with(id: &str, scores: Vec<f32>, labels: Vec<u8>) -> Case {
        Case::new(id, vec![1.0, 0.0], scores, labels)
    }

    fn nb<'a>(entries: Vec<Neighbor<'a>>) -> Neighborhood<'a> {
        let k = entries.len().max(1);
        Neighborhood::from_entries(entries, k).unwrap()
    }

    #[test]
    fn indicator_is_strict() {
        let out = apply_threshold(&[0.9, 0.5, 0.1], &Tau::Scalar(0.5)).unwrap();
        assert_eq!(out, vec![1, 0, 0]);
    }

    #[test]
    fn negative_infinity_passes_everything() {
        let out = apply_threshold(&[0.9, 0.5, 0.1], &Tau::Scalar(f64::NEG_INFINITY)).unwrap();
        assert_eq!(out, vec![1, 1, 1]);
    }

    #[test]
    fn per_label_thresholds() {
        let out =
            apply_threshold(&[0.9, 0.5, 0.1], &Tau::PerLabel(vec![0.8, 0.4, 0.2])).unwrap();
        assert_eq!(out, vec![1, 1, 0]);
        let err = apply_threshold(&[0.9], &Tau::PerLabel(vec![0.8, 0.4])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, actual: 2 });
    }

    #[test]
    fn raising_tau_never_adds_labels() {
        let scores = [0.9, 0.52, 0.1, -0.3, 0.52];
        let mut previous = u32::MAX;
        for step in 0..50 {
            let tau = -0.5 + step as f64 * 0.04;
            let count: u32 = apply_threshold(&scores, &Tau::Scalar(tau))
                .unwrap()
                .iter()
                .map(|&v| v as u32)
                .sum();
            assert!(count <= previous, "tau {tau} added labels");
            previous = count;
        }
    }

    #[test]
    fn expected_cardinality_constant_neighbors() {
        let a = case_with("a", vec![0.5; 4], vec![1, 1, 0, 0]);
        let b = case_with("b", vec![0.5; 4], vec![0, 1, 1, 0]);
        let c = case_with("c", vec![0.5; 4], vec![1, 0, 0, 1]);
        let hood = nb(vec![
            Neighbor { case: &a, weight: 0.5 },
            Neighbor { case: &b, weight: 0.5 },
            Neighbor { case: &c, weight: 0.5 },
        ]);
        assert_eq!(expected_cardinality(&hood).unwrap(), 2.0);
    }

    #[test]
    fn expected_cardinality_weighted() {
        let three = case_with("a", vec![0.5; 4], vec![1, 1, 1, 0]);
        let one = case_with("b", vec![0.5; 4], vec![1, 0, 0, 0]);
        let hood = nb(vec![
            Neighbor { case: &three, weight: 0.8 },
            Neighbor { case: &one, weight: 0.2 },
        ]);
        let k_star = expected_cardinality(&hood).unwrap();
        assert!((k_star - 2.6).abs() < 1e-12, "got {k_star}");
    }

    #[test]
    fn avgcount_midpoint_cut() {
        let three = case_with("a", vec![0.5; 4], vec![1, 1, 1, 0]);
        let one = case_with("b", vec![0.5; 4], vec![1, 0, 0, 0]);
        let hood = nb(vec![
            Neighbor { case: &three, weight: 0.8 },
            Neighbor { case: &one, weight: 0.2 },
        ]);
        // k* = 2.6, so exactly 2 labels survive the cut at (0.7 + 0.4) / 2.
        let pred = avgcount_select("q", &adapted(vec![0.9, 0.7, 0.4, 0.1]), &hood).unwrap();
        assert_eq!(pred.labels, vec![1, 1, 0, 0]);
        match pred.tau {
            Tau::Scalar(t) => assert!((t - 0.55).abs() < 1e-12, "got {t}"),
            _ => panic!("expected scalar tau"),
        }
        // Brute force over every cut position: only this one keeps 2 labels.
        for cut in [1.0, 0.8, 0.55, 0.25, 0.0] {
            let count: u8 =
                apply_threshold(&[0.9, 0.7, 0.4, 0.1], &Tau::Scalar(cut)).unwrap().iter().sum();
            assert_eq!(count == 2, (0.4..0.7).contains(&cut));
        }
    }

    #[test]
    fn avgcount_empty_and_full_cuts() {
        let none = case_with("a", vec![0.5; 3], vec![0, 0, 0]);
        let hood_none = nb(vec![Neighbor { case: &none, weight: 1.0 }]);
        let pred = avgcount_select("q", &adapted(vec![0.9, 0.5, 0.2]), &hood_none).unwrap();
        assert_eq!(pred.labels, vec![0, 0, 0]);

        let all = case_with("b", vec![0.5; 3], vec![1, 1, 1]);
        let hood_all = nb(vec![Neighbor { case: &all, weight: 1.0 }]);
        let pred = avgcount_select("q", &adapted(vec![0.9, 0.5, 0.2]), &hood_all).unwrap();
        assert_eq!(pred.labels, vec![1, 1, 1]);
    }

    #[test]
    fn avgcount_needs_a_positive_weight() {
        let a = case_with("a", vec![0.5; 3], vec![1, 0, 0]);
        let hood = nb(vec![Neighbor { case: &a, weight: -0.4 }]);
        assert_eq!(
            avgcount_select("q", &adapted(vec![0.9, 0.5, 0.2]), &hood).unwrap_err(),
            Error::NoUsableNeighbors
        );
    }

    #[test]
    fn rankcal_single_neighbor_boundary() {
        let a = case_with("a", vec![0.7, 0.4, 0.9], vec![1, 1, 0]);
        let hood = nb(vec![Neighbor { case: &a, weight: 0.37 }]);
        // Positive labels score 0.7 and 0.4; the boundary is their minimum,
        // returned exactly even for a non-dyadic weight.
        assert_eq!(rankcal_tau(&hood, 0.5).unwrap(), 0.4_f32 as f64);
    }

    #[test]
    fn rankcal_weighted_mean_of_boundaries() {
        let a = case_with("a", vec![0.4, 0.9], vec![1, 0]);
        let b = case_with("b", vec![0.6, 0.2], vec![1, 0]);
        let hood =
            nb(vec![Neighbor { case: &a, weight: 0.5 }, Neighbor { case: &b, weight: 0.5 }]);
        let tau = rankcal_tau(&hood, 0.5).unwrap();
        assert!((tau - 0.5).abs() < 1e-7, "got {tau}");
    }

    #[test]
    fn rankcal_excludes_all_negative_neighbors() {
        let silent = case_with("a", vec![0.9, 0.8], vec![0, 0]);
        let speaking = case_with("b", vec![0.4, 0.7], vec![1, 1]);
        let hood = nb(vec![
            Neighbor { case: &silent, weight: 0.9 },
            Neighbor { case: &speaking, weight: 0.3 },
        ]);
        // The all-negative neighbor drops out of numerator and denominator.
        assert_eq!(rankcal_tau(&hood, 0.5).unwrap(), 0.4_f32 as f64);
    }

    #[test]
    fn rankcal_falls_back_when_nobody_contributes() {
        let silent = case_with("a", vec![0.9, 0.8], vec![0, 0]);
        let hood = nb(vec![Neighbor { case: &silent, weight: 0.9 }]);
        assert_eq!(rankcal_tau(&hood, 0.25).unwrap(), 0.25);
    }

    #[test]
    fn rankcal_rejects_empty_neighborhood() {
        let hood = Neighborhood::from_entries(vec![], 1).unwrap();
        assert_eq!(rankcal_tau(&hood, 0.5).unwrap_err(), Error::NoUsableNeighbors);
    }

    #[test]
    fn global_tuner_finds_the_separating_midpoint() {
        let tau =
            tune_global_threshold(&[vec![0.9, 0.1]], &[vec![1, 0]]).unwrap();
        assert!((tau - 0.5).abs() < 1e-6, "got {tau}");
        // And that threshold is perfect on the row.
        let out = apply_threshold(&[0.9_f32 as f64, 0.1_f32 as f64], &Tau::Scalar(tau)).unwrap();
        assert_eq!(out, vec![1, 0]);
    }

    #[test]
    fn global_tuner_goes_below_min_when_everything_is_positive() {
        let tau = tune_global_threshold(
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
            &[vec![1, 1], vec![1, 1]],
        )
        .unwrap();
        assert!(tau < 1.0);
        let out = apply_threshold(&[1.0, 1.0], &Tau::Scalar(tau)).unwrap();
        assert_eq!(out, vec![1, 1]);
    }

    #[test]
    fn global_tuner_breaks_ties_toward_the_smallest_tau() {
        // Scores anti-correlated with labels: every candidate scores F1 = 0,
        // so the smallest candidate (below the minimum score) wins.
        let tau = tune_global_threshold(&[vec![0.9, 0.1]], &[vec![0, 1]]).unwrap();
        assert!(tau < 0.1_f32 as f64, "got {tau}");
    }

    #[test]
    fn global_tuner_rejects_empty_input() {
        assert_eq!(tune_global_threshold(&[], &[]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn labelwise_tuner_per_column() {
        let scores = vec![vec![0.8, 0.3], vec![0.3, 0.9]];
        let labels = vec![vec![1, 0], vec![0, 0]];
        let taus = tune_labelwise_thresholds(&scores, &labels).unwrap();
        // Column 0: (0.8, 0.3) with truths (1, 0) → midpoint 0.55.
        assert!((taus[0] - 0.55).abs() < 1e-6, "got {}", taus[0]);
        // Column 1 has no positives → never predict.
        assert_eq!(taus[1], NEVER_PREDICT);
    }

    #[test]
    fn labelwise_tuning_is_independent_per_label() {
        let scores = vec![vec![0.8, 0.2], vec![0.3, 0.6]];
        let labels = vec![vec![1, 0], vec![0, 1]];
        let joint = tune_labelwise_thresholds(&scores, &labels).unwrap();
        let col0 = tune_labelwise_thresholds(
            &[vec![0.8], vec![0.3]],
            &[vec![1], vec![0]],
        )
        .unwrap();
        let col1 = tune_labelwise_thresholds(
            &[vec![0.2], vec![0.6]],
            &[vec![0], vec![1]],
        )
        .unwrap();
        assert_eq!(joint, vec![col0[0], col1[0]]);
    }
}
