use alloc::collections::BTreeMap;
use alloc::string::String;

use super::MatchConfig;
use crate::text::bleu_tokens;

/// Sentence-level BLEU of `candidate` against a single `reference`.
///
/// Unigram precision is unsmoothed; orders 2..=max_ngram use add-one
/// smoothing when `cfg.smooth_higher_orders` is set. Orders longer than the
/// candidate contribute `1/1` under smoothing.
pub fn bleu(candidate: &str, reference: &str, cfg: &MatchConfig) -> f64 {
    let cand = bleu_tokens(candidate, cfg.case_fold);
    let refr = bleu_tokens(reference, cfg.case_fold);
    match (cand.is_empty(), refr.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let max_n = cfg.max_ngram.max(1);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&refr, n);
        let total = cand.len().saturating_sub(n - 1) as f64;
        let matched: usize = cand_counts
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let (num, den) = if n == 1 || !cfg.smooth_higher_orders {
            (matched as f64, total)
        } else {
            (matched as f64 + 1.0, total + 1.0)
        };
        if num == 0.0 || den == 0.0 {
            return 0.0;
        }
        log_sum += libm::log(num / den);
    }
    let precision = libm::exp(log_sum / max_n as f64);
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c > r { 1.0 } else { libm::exp(1.0 - r / c) };
    (precision * bp).clamp(0.0, 1.0)
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}
