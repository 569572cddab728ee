//! ROUGE-L: longest-common-subsequence F-measure.
//!
//! Uses the standard recall-weighted F with β = 1.2, i.e.
//! F = (1 + β²)·P·R / (R + β²·P) where P = LCS/|candidate| and
//! R = LCS/|reference|.

use super::tokenize;

const BETA_SQUARED: f64 = 1.2 * 1.2;

/// Length of the longest common subsequence, O(|a|·|b|) with a rolling row.
fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            row[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// ROUGE-L of a candidate against one reference, in [0, 1].
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    let lcs = lcs_len(&c, &r);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / c.len() as f64;
    let recall = lcs as f64 / r.len() as f64;
    (1.0 + BETA_SQUARED) * precision * recall / (recall + BETA_SQUARED * precision)
}
