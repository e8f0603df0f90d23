//! Extraction and generation metrics.

mod bleu;
mod fine;
mod icc;
mod report;
mod soft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::bleu;
pub use fine::{esa, esa_items, fine, split_sentences, FineScore};
pub use icc::{icc, is_reliable, ScoreMatrix, RELIABILITY_THRESHOLD};
pub use report::{evaluate, macro_average, render_table, Dimension, DimensionScore, EvalReport, MacroScore};
pub use soft::{actor_f1, element_f1, elements_match, flow_f1, flow_weight, gateway_f1, gateway_match};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Element pairs with BLEU at or above this value match.
    pub bleu_threshold: f64,
    pub max_ngram: usize,
    /// Add-one smoothing for n-gram orders above one.
    pub smooth_higher_orders: bool,
    pub case_fold: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            bleu_threshold: 0.5,
            max_ngram: 4,
            smooth_higher_orders: true,
            case_fold: true,
        }
    }
}

impl MatchConfig {
    pub fn with_threshold(bleu_threshold: f64) -> Result<Self, MetricError> {
        if !(bleu_threshold > 0.0 && bleu_threshold <= 1.0) {
            return Err(MetricError::Threshold(bleu_threshold));
        }
        Ok(MatchConfig {
            bleu_threshold,
            ..MatchConfig::default()
        })
    }
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }

    /// From a (possibly fractional) true-positive mass and the two set sizes.
    pub fn from_counts(tp: f64, predicted: usize, gold: usize) -> Self {
        match (predicted, gold) {
            (0, 0) => Prf::perfect(),
            (0, _) | (_, 0) => Prf::zero(),
            _ => Prf::from_pr(tp / predicted as f64, tp / gold as f64),
        }
    }

    pub fn perfect() -> Self {
        Prf { precision: 1.0, recall: 1.0, f1: 1.0 }
    }

    pub fn zero() -> Self {
        Prf { precision: 0.0, recall: 0.0, f1: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("bleu threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("nli-unavailable: {0}")]
    NliUnavailable(crate::backends::BackendError),
    #[error("score matrix needs at least 2 raters and 2 items with equal row lengths")]
    Matrix,
}
