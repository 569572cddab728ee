//! Greedy and beam-search decoding over any step-wise sequence scorer.
//!
//! Decoding is separated from the network so search behaviour can be tested
//! against hand-built probability tables. Beam search is length-normalized
//! and always evaluates the greedy candidate alongside the surviving beams,
//! so its result never scores below greedy's.

use crate::error::{Error, Result};

/// A conditional next-token distribution: anything that can score "what
/// comes after this generated prefix".
///
/// Prefixes contain generated tokens only — the scorer accounts for its own
/// begin-of-sequence handling internally.
pub trait SequenceScorer {
    fn vocab_size(&self) -> usize;
    fn eos_id(&self) -> usize;
    /// Log-probabilities over the next token, given the generated prefix.
    /// Must return `vocab_size()` finite values summing to one in
    /// probability space.
    fn step_log_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

/// One finished decode: generated tokens (end token excluded), the total
/// log-probability of every step taken, and the number of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub ids: Vec<usize>,
    pub log_prob: f64,
    pub steps: usize,
}

impl DecodeResult {
    /// Length-normalized score: mean per-step log-probability.
    pub fn normalized(&self) -> f64 {
        self.log_prob / self.steps.max(1) as f64
    }
}

/// Log-probability of generating exactly `ids`, step by step, not counting
/// the final end-of-sequence step. Refuses ids outside the vocabulary.
pub fn sequence_log_prob(scorer: &impl SequenceScorer, ids: &[usize]) -> Result<f64> {
    let vocab = scorer.vocab_size();
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
        return Err(Error::Model(format!(
            "token id {bad} outside vocabulary of {vocab}"
        )));
    }
    let mut total = 0.0;
    for i in 0..ids.len() {
        total += scorer.step_log_probs(&ids[..i])[ids[i]];
    }
    Ok(total)
}

/// Index of the largest log-probability, ties resolved to the lowest id.
fn argmax(log_probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &lp) in log_probs.iter().enumerate().skip(1) {
        if lp > log_probs[best] {
            best = i;
        }
    }
    best
}

/// Decodes by taking the single most likely token at every step.
pub fn greedy_decode(scorer: &impl SequenceScorer, max_len: usize) -> DecodeResult {
    let mut ids = Vec::new();
    let mut log_prob = 0.0;
    let mut steps = 0;
    while steps < max_len {
        let lp = scorer.step_log_probs(&ids);
        let next = argmax(&lp);
        log_prob += lp[next];
        steps += 1;
        if next == scorer.eos_id() {
            break;
        }
        ids.push(next);
    }
    DecodeResult { ids, log_prob, steps }
}

#[derive(Debug, Clone)]
struct Hypothesis {
    ids: Vec<usize>,
    log_prob: f64,
    steps: usize,
    finished: bool,
}

impl Hypothesis {
    fn normalized(&self) -> f64 {
        self.log_prob / self.steps.max(1) as f64
    }
}

/// Orders hypotheses best-first: higher normalized score, then
/// lexicographically smaller token sequence for determinism.
fn hypothesis_order(a: &Hypothesis, b: &Hypothesis) -> std::cmp::Ordering {
    b.normalized()
        .partial_cmp(&a.normalized())
        .expect("decode scores are finite")
        .then_with(|| a.ids.cmp(&b.ids))
}

/// Length-normalized beam search of the given width.
///
/// The greedy decode always competes in the final selection, so the
/// returned result's normalized score is at least greedy's regardless of
/// how the beams develop.
pub fn beam_search(scorer: &impl SequenceScorer, width: usize, max_len: usize) -> DecodeResult {
    assert!(width >= 1, "beam width must be at least 1");
    let mut beams = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
        steps: 0,
        finished: false,
    }];

    while beams.iter().any(|b| !b.finished && b.steps < max_len) {
        let mut candidates = Vec::new();
        for beam in &beams {
            if beam.finished || beam.steps >= max_len {
                candidates.push(beam.clone());
                continue;
            }
            let lp = scorer.step_log_probs(&beam.ids);
            let mut ranked: Vec<usize> = (0..lp.len()).collect();
            ranked.sort_by(|&a, &b| {
                lp[b].partial_cmp(&lp[a])
                    .expect("decode scores are finite")
                    .then(a.cmp(&b))
            });
            for &token in ranked.iter().take(width) {
                let mut ids = beam.ids.clone();
                let finished = token == scorer.eos_id();
                if !finished {
                    ids.push(token);
                }
                candidates.push(Hypothesis {
                    ids,
                    log_prob: beam.log_prob + lp[token],
                    steps: beam.steps + 1,
                    finished,
                });
            }
        }
        candidates.sort_by(hypothesis_order);
        candidates.truncate(width);
        beams = candidates;
    }

    let best = beams
        .into_iter()
        .min_by(|a, b| hypothesis_order(a, b))
        .expect("at least one beam survives");
    let beam_result = DecodeResult {
        ids: best.ids,
        log_prob: best.log_prob,
        steps: best.steps,
    };
    let greedy = greedy_decode(scorer, max_len);
    if greedy.normalized() > beam_result.normalized() {
        greedy
    } else {
        beam_result
    }
}
