//! Multi-label evaluation: micro/macro precision, recall, F1, Hamming loss.
//!
//! Zero-denominator precision, recall, and F1 are defined as 0. That
//! convention is conservative and affects macro averages on labels with no
//! support; it is recorded in the report itself so downstream comparisons
//! know which convention produced the numbers.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Per-label confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl LabelCounts {
    fn add(&mut self, other: &LabelCounts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    fn f1(&self) -> f64 {
        ratio(2 * self.true_pos, 2 * self.true_pos + self.false_pos + self.false_neg)
    }
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Confusion counts per label plus the pooled totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub per_label: Vec<LabelCounts>,
    pub totals: LabelCounts,
}

/// The evaluation suite over one prediction set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub hamming_loss: f64,
    pub n_instances: usize,
    pub n_labels: usize,
}

/// Tallies per-label and pooled confusion counts over binary matrices.
pub fn confusion_counts(preds: &[Vec<u8>], truths: &[Vec<u8>]) -> Result<ConfusionCounts> {
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if preds.len() != truths.len() {
        return Err(Error::ShapeMismatch { expected: preds.len(), actual: truths.len() });
    }
    let label_count = preds[0].len();
    let mut per_label = alloc::vec![LabelCounts::default(); label_count];
    for (pred_row, truth_row) in preds.iter().zip(truths.iter()) {
        if pred_row.len() != label_count {
            return Err(Error::ShapeMismatch { expected: label_count, actual: pred_row.len() });
        }
        if truth_row.len() != label_count {
            return Err(Error::ShapeMismatch { expected: label_count, actual: truth_row.len() });
        }
        for (label, (&p, &t)) in pred_row.iter().zip(truth_row.iter()).enumerate() {
            if p > 1 {
                return Err(Error::NonBinaryEntry(p));
            }
            if t > 1 {
                return Err(Error::NonBinaryEntry(t));
            }
            let counts = &mut per_label[label];
            match (p, t) {
                (1, 1) => counts.true_pos += 1,
                (1, 0) => counts.false_pos += 1,
                (0, 1) => counts.false_neg += 1,
                _ => counts.true_neg += 1,
            }
        }
    }
    let mut totals = LabelCounts::default();
    for counts in &per_label {
        totals.add(counts);
    }
    Ok(ConfusionCounts { per_label, totals })
}

/// Computes the full report: micro metrics from pooled totals, macro metrics
/// as the unweighted mean over every label in the vocabulary (including
/// zero-support labels), and Hamming loss as the fraction of disagreeing
/// cells.
pub fn compute_metrics(preds: &[Vec<u8>], truths: &[Vec<u8>]) -> Result<MetricsReport> {
    let counts = confusion_counts(preds, truths)?;
    let n_instances = preds.len();
    let n_labels = counts.per_label.len();

    let macro_precision =
        counts.per_label.iter().map(LabelCounts::precision).sum::<f64>() / n_labels as f64;
    let macro_recall =
        counts.per_label.iter().map(LabelCounts::recall).sum::<f64>() / n_labels as f64;
    let macro_f1 = counts.per_label.iter().map(LabelCounts::f1).sum::<f64>() / n_labels as f64;

    let disagreements = counts.totals.false_pos + counts.totals.false_neg;
    let hamming_loss = ratio(disagreements, n_instances * n_labels);

    Ok(MetricsReport {
        micro_precision: counts.totals.precision(),
        micro_recall: counts.totals.recall(),
        micro_f1: counts.totals.f1(),
        macro_precision,
        macro_recall,
        macro_f1,
        hamming_loss,
        n_instances,
        n_labels,
    })
}
