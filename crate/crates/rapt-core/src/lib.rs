//! Retrieval-augmented post-hoc thresholding for multi-label classifiers.
//!
//! A backbone classifier scores every label of a query instance, but turning
//! those scores into a label *set* needs a cutoff, and a single global cutoff
//! is brittle when score calibration drifts across the instance space. This
//! crate wraps any classifier that exposes an embedding and a per-label score
//! vector:
//!
//! 1. [`casebase`] stores labeled (embedding, scores, labels) cases,
//! 2. [`retrieval`] finds the top-k most similar cases by cosine similarity,
//! 3. [`adaptation`] transfers the neighbors' prediction residuals onto the
//!    query's score vector,
//! 4. [`thresholding`] selects the final label set with an instance-specific
//!    threshold (neighborhood cardinality or rank calibration), alongside
//!    static baselines (fixed and validation-tuned thresholds),
//! 5. [`metrics`] evaluates predictions with micro/macro precision, recall,
//!    F1, and Hamming loss.
//!
//! The crate is `no_std` (with `alloc`) so it can be embedded anywhere; IO,
//! file formats, and the CLI live in the companion `rapt` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adaptation;
pub mod casebase;
mod error;
pub mod metrics;
pub mod retrieval;
pub mod thresholding;

pub use adaptation::{adapt_scores, AdaptedScores, Contributor};
pub use casebase::{Case, CaseBase, LabelVocab};
pub use error::Error;
pub use metrics::{compute_metrics, MetricsReport};
pub use retrieval::{cosine_similarity, retrieve_top_k, retrieve_top_k_excluding, Neighborhood};
pub use thresholding::{
    apply_threshold, avgcount_select, rankcal_select, threshold_select, tune_global_threshold,
    tune_labelwise_thresholds, Prediction, Tau, ThresholdStrategy,
};

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
