//! Report evaluation: text-overlap metrics (BLEU-1..4, ROUGE-L, METEOR,
//! CIDEr) and clinical-efficacy precision/recall/F1 over extracted
//! concepts.
//!
//! The full-report protocol scores generated reports against *templated
//! ground truth*: the reference is built by replacing the gold pathological
//! description into the normal template with its gold span labels — see
//! [`build_ground_truth_report`] — so candidate and reference share the
//! template's phrasing wherever the study is normal.

mod bleu;
mod ce;
mod cider;
mod meteor;
mod rouge;

pub use bleu::{bleu, BleuStats};
pub use ce::{
    ce_from_sets, ce_metrics, extract_concepts, ConceptLabeler, ImportedLabels, RuleLabeler,
    TextRole,
};
pub use cider::cider;
pub use meteor::meteor;
pub use rouge::rouge_l;

use serde::Serialize;

use crate::corpus::{NormalTemplate, PathologicalDescription, SpanLabelSet};
use crate::error::{Error, Result};
use crate::replace::build_report;

/// Metric tokenization: lowercase, every punctuation character a separate
/// token, whitespace dropped. The de-identification placeholder `XXXX` is
/// preserved verbatim so it matches itself across texts.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
        } else {
            if !word.is_empty() {
                tokens.push(finish_word(std::mem::take(&mut word)));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(finish_word(word));
    }
    tokens
}

fn finish_word(word: String) -> String {
    if word == "XXXX" {
        word
    } else {
        word.to_lowercase()
    }
}

/// Micro-averaged precision/recall/F1 from summed counts.
///
/// Conventions: nothing predicted and nothing expected → perfect (1,1,1);
/// one side empty but not the other → (0,0,0).
pub fn micro_prf(true_positives: usize, predicted: usize, expected: usize) -> (f64, f64, f64) {
    if predicted == 0 && expected == 0 {
        return (1.0, 1.0, 1.0);
    }
    if predicted == 0 || expected == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = true_positives as f64 / predicted as f64;
    let r = true_positives as f64 / expected as f64;
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Corpus-level metric scores. BLEU is computed from aggregate n-gram
/// counts, ROUGE-L and METEOR are per-pair means, CIDEr is corpus-level by
/// definition (range [0, 10], stored unscaled), and CE is micro-averaged.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub n: usize,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub cider: f64,
    pub ce_precision: f64,
    pub ce_recall: f64,
    pub ce_f1: f64,
}

impl MetricReport {
    /// An aligned two-column text table of all scores.
    pub fn to_table(&self) -> String {
        let rows = [
            ("pairs", self.n as f64, 0),
            ("BLEU-1", self.bleu1, 4),
            ("BLEU-2", self.bleu2, 4),
            ("BLEU-3", self.bleu3, 4),
            ("BLEU-4", self.bleu4, 4),
            ("ROUGE-L", self.rouge_l, 4),
            ("METEOR", self.meteor, 4),
            ("CIDEr", self.cider, 4),
            ("CE precision", self.ce_precision, 4),
            ("CE recall", self.ce_recall, 4),
            ("CE F1", self.ce_f1, 4),
        ];
        let mut out = String::new();
        for (name, value, places) in rows {
            out.push_str(&format!("{name:<14}{value:>10.places$}\n"));
        }
        out
    }
}

/// Builds the full-report reference text for one study: the gold
/// pathological description replaced into the template under its gold span
/// labels.
pub fn build_ground_truth_report(
    template: &NormalTemplate,
    gold_description: &PathologicalDescription,
    gold_spans: &[SpanLabelSet],
) -> Result<String> {
    Ok(build_report(template, gold_description, gold_spans)?.render())
}

/// Scores a corpus of candidate texts against line-aligned references.
///
/// CE concepts come from `labeler`, letting callers substitute imported
/// labels for the built-in rule matcher.
pub fn evaluate_corpus(
    candidates: &[String],
    references: &[String],
    labeler: &dyn ConceptLabeler,
) -> Result<MetricReport> {
    if candidates.is_empty() {
        return Err(Error::Evaluation("empty corpus".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Evaluation(format!(
            "{} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }

    let mut stats = BleuStats::new();
    let mut rouge_sum = 0.0;
    let mut meteor_sum = 0.0;
    let mut intersection = 0;
    let mut generated_total = 0;
    let mut reference_total = 0;
    for (i, (candidate, reference)) in candidates.iter().zip(references).enumerate() {
        stats.add_pair(candidate, std::slice::from_ref(reference));
        rouge_sum += rouge_l(candidate, reference);
        meteor_sum += meteor(candidate, reference);

        let g = labeler.concepts(TextRole::Candidate, i, candidate);
        let r = labeler.concepts(TextRole::Reference, i, reference);
        intersection += g.intersection(&r).count();
        generated_total += g.len();
        reference_total += r.len();
    }

    let ref_lists: Vec<Vec<String>> = references.iter().map(|r| vec![r.clone()]).collect();
    let n = candidates.len() as f64;
    let (ce_precision, ce_recall, ce_f1) =
        micro_prf(intersection, generated_total, reference_total);
    Ok(MetricReport {
        n: candidates.len(),
        bleu1: stats.score(1),
        bleu2: stats.score(2),
        bleu3: stats.score(3),
        bleu4: stats.score(4),
        rouge_l: rouge_sum / n,
        meteor: meteor_sum / n,
        cider: cider(candidates, &ref_lists),
        ce_precision,
        ce_recall,
        ce_f1,
    })
}

/// [`evaluate_corpus`] with the rule-table concept labeler.
pub fn evaluate_with_rules(
    candidates: &[String],
    references: &[String],
    rules: &crate::corpus::RuleTable,
) -> Result<MetricReport> {
    evaluate_corpus(candidates, references, &RuleLabeler(rules))
}
