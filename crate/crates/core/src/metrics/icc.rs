use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// ICC at or above this value counts as reliable agreement.
pub const RELIABILITY_THRESHOLD: f64 = 0.75;

/// Ratings laid out as `k` raters (rows) by `n` items (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub ratings: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(ratings: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let k = ratings.len();
        let n = ratings.first().map_or(0, Vec::len);
        if k < 2 || n < 2 || ratings.iter().any(|r| r.len() != n) {
            return Err(MetricError::Matrix);
        }
        Ok(ScoreMatrix { ratings })
    }

    pub fn raters(&self) -> usize {
        self.ratings.len()
    }

    pub fn items(&self) -> usize {
        self.ratings[0].len()
    }
}

/// One-way intraclass correlation with items as the groups:
/// `(MSB - MSW) / (MSB + (k - 1) MSW)` where `k` is the number of ratings
/// per item. A matrix with no variance at all is perfect agreement.
pub fn icc(m: &ScoreMatrix) -> f64 {
    let (k, n) = (m.raters() as f64, m.items());
    let item_means: Vec<f64> = (0..n)
        .map(|j| m.ratings.iter().map(|r| r[j]).sum::<f64>() / k)
        .collect();
    let grand = item_means.iter().sum::<f64>() / n as f64;
    let ss_between: f64 = item_means.iter().map(|&mu| k * (mu - grand) * (mu - grand)).sum();
    let ss_within: f64 = (0..n)
        .map(|j| {
            m.ratings
                .iter()
                .map(|r| (r[j] - item_means[j]) * (r[j] - item_means[j]))
                .sum::<f64>()
        })
        .sum();
    let ms_between = ss_between / (n as f64 - 1.0);
    let ms_within = ss_within / (n as f64 * (k - 1.0));
    let denom = ms_between + (k - 1.0) * ms_within;
    if denom == 0.0 {
        return 1.0;
    }
    (ms_between - ms_within) / denom
}

pub fn is_reliable(icc: f64) -> bool {
    icc >= RELIABILITY_THRESHOLD
}
