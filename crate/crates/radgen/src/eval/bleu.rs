//! BLEU: modified n-gram precision with brevity penalty.
//!
//! Corpus scores aggregate clipped-match and candidate counts over all
//! pairs before taking the geometric mean, which is the standard corpus
//! BLEU; the single-pair [`bleu`] function is the one-pair corpus.
//!
//! Two conventions keep the score well-defined on short texts: orders with
//! zero candidate n-grams are skipped (so a text scores 1.0 against itself
//! at every order), and an order with candidate n-grams but zero matches
//! contributes an epsilon (1e-9) numerator instead of collapsing the
//! geometric mean to zero.

use std::collections::HashMap;

use super::tokenize;

const MAX_ORDER: usize = 4;
const EPSILON: f64 = 1e-9;

/// Counts n-grams of one order in a token slice.
fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for window in tokens.windows(order) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Aggregated corpus counts for BLEU.
#[derive(Debug, Clone, Default)]
pub struct BleuStats {
    matches: [f64; MAX_ORDER],
    candidates: [f64; MAX_ORDER],
    candidate_len: usize,
    reference_len: usize,
}

impl BleuStats {
    pub fn new() -> BleuStats {
        BleuStats::default()
    }

    /// Accumulates one candidate with its references.
    pub fn add_pair(&mut self, candidate: &str, references: &[impl AsRef<str>]) {
        let candidate = tokenize(candidate);
        let references: Vec<Vec<String>> =
            references.iter().map(|r| tokenize(r.as_ref())).collect();
        self.add_tokenized(&candidate, &references);
    }

    /// Accumulates one pre-tokenized pair.
    pub fn add_tokenized(&mut self, candidate: &[String], references: &[Vec<String>]) {
        self.candidate_len += candidate.len();
        self.reference_len += closest_reference_len(candidate.len(), references);

        for order in 1..=MAX_ORDER {
            let cand_counts = ngram_counts(candidate, order);
            if cand_counts.is_empty() {
                continue;
            }
            let mut max_ref_counts: HashMap<&[String], usize> = HashMap::new();
            for reference in references {
                for (gram, count) in ngram_counts(reference, order) {
                    let entry = max_ref_counts.entry(gram).or_insert(0);
                    *entry = (*entry).max(count);
                }
            }
            for (gram, count) in &cand_counts {
                let clip = max_ref_counts.get(gram).copied().unwrap_or(0);
                self.matches[order - 1] += (*count).min(clip) as f64;
                self.candidates[order - 1] += *count as f64;
            }
        }
    }

    /// BLEU-n over everything accumulated so far, `n` in 1..=4.
    pub fn score(&self, n: usize) -> f64 {
        assert!((1..=MAX_ORDER).contains(&n), "BLEU order must be 1..=4");
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for k in 0..n {
            if self.candidates[k] == 0.0 {
                continue;
            }
            let precision = self.matches[k].max(EPSILON) / self.candidates[k];
            log_sum += precision.ln();
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        let geometric_mean = (log_sum / orders as f64).exp();
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        let brevity_penalty = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        brevity_penalty * geometric_mean
    }
}

/// Reference length closest to the candidate's (ties to the shorter), as in
/// standard multi-reference BLEU.
fn closest_reference_len(candidate_len: usize, references: &[Vec<String>]) -> usize {
    references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(candidate_len), len))
        .unwrap_or(0)
}

/// Single-pair BLEU-n of a candidate against references.
pub fn bleu(candidate: &str, references: &[impl AsRef<str>], n: usize) -> f64 {
    let mut stats = BleuStats::new();
    stats.add_pair(candidate, references);
    stats.score(n)
}
