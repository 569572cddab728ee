//! CIDEr: consensus scoring via TF-IDF-weighted n-gram cosine similarity.
//!
//! For each order n = 1..4, every text becomes a vector of raw n-gram
//! counts weighted by corpus IDF, where IDF(g) = ln N − ln max(1, df(g)),
//! N is the number of reference sets and df counts reference sets
//! mentioning g. The score is 10 × the mean over orders of the mean over
//! pairs of the candidate↔reference cosine (averaged over multiple
//! references), so it lives in [0, 10].
//!
//! Consequences worth knowing: a single-pair corpus scores 0 (every
//! reference n-gram has df = N, hence IDF 0 and a zero vector), and a
//! corpus of mutually distinct texts scores exactly 10 when candidates
//! equal their references.

use std::collections::{HashMap, HashSet};

use super::tokenize;

const MAX_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<Vec<String>, f64> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for window in tokens.windows(order) {
            *counts.entry(window.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    counts
}

fn cosine(
    a: &HashMap<Vec<String>, f64>,
    b: &HashMap<Vec<String>, f64>,
    idf: &HashMap<Vec<String>, f64>,
) -> f64 {
    let weight = |counts: &HashMap<Vec<String>, f64>, gram: &Vec<String>| {
        counts.get(gram).copied().unwrap_or(0.0) * idf.get(gram).copied().unwrap_or(0.0)
    };
    let mut dot = 0.0;
    for gram in a.keys() {
        dot += weight(a, gram) * weight(b, gram);
    }
    let norm = |counts: &HashMap<Vec<String>, f64>| {
        counts
            .keys()
            .map(|g| weight(counts, g).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Corpus CIDEr of candidates against per-candidate reference lists, in
/// [0, 10]. Both slices must be non-empty and line-aligned; violations
/// score 0 rather than panic so the metric is total.
pub fn cider(candidates: &[String], references: &[Vec<String>]) -> f64 {
    if candidates.is_empty() || candidates.len() != references.len() {
        return 0.0;
    }
    let n_sets = references.len() as f64;
    let cand_tokens: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
    let ref_tokens: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|refs| refs.iter().map(|r| tokenize(r)).collect())
        .collect();

    let mut order_means = Vec::with_capacity(MAX_ORDER);
    for order in 1..=MAX_ORDER {
        // Document frequency: in how many reference sets does each n-gram
        // appear at least once?
        let mut df: HashMap<Vec<String>, f64> = HashMap::new();
        for refs in &ref_tokens {
            let mut seen: HashSet<Vec<String>> = HashSet::new();
            for tokens in refs {
                seen.extend(ngram_counts(tokens, order).into_keys());
            }
            for gram in seen {
                *df.entry(gram).or_insert(0.0) += 1.0;
            }
        }
        let idf: HashMap<Vec<String>, f64> = df
            .iter()
            .map(|(gram, &d)| (gram.clone(), n_sets.ln() - d.max(1.0).ln()))
            .collect();
        // N-grams absent from every reference set get df = 0, i.e. the
        // maximal IDF ln N; honor that for candidate-only grams.
        let novel_idf = n_sets.ln();

        let mut pair_sum = 0.0;
        for (cand, refs) in cand_tokens.iter().zip(&ref_tokens) {
            if refs.is_empty() {
                continue;
            }
            let cand_counts = ngram_counts(cand, order);
            let mut idf_full = idf.clone();
            for gram in cand_counts.keys() {
                idf_full.entry(gram.clone()).or_insert(novel_idf);
            }
            let mut ref_sum = 0.0;
            for tokens in refs {
                ref_sum += cosine(&cand_counts, &ngram_counts(tokens, order), &idf_full);
            }
            pair_sum += ref_sum / refs.len() as f64;
        }
        order_means.push(pair_sum / candidates.len() as f64);
    }
    10.0 * order_means.iter().sum::<f64>() / MAX_ORDER as f64
}
