//! Clinical-efficacy metrics: precision/recall/F1 over clinical concepts
//! extracted from generated and reference text.
//!
//! The default labeler is the annotation rule table's concept matcher plus
//! a negation filter, so the all-normal template extracts no concepts. A
//! concept mention is suppressed when a negation cue ("no", "without" — "no
//! evidence of" is covered by "no") appears as a word earlier in its
//! sentence, or when the sentence asserts normality outright (contains
//! "normal" or "unremarkable" as a word, e.g. "Heart size is within normal
//! limits."). Labels can instead be imported from files when an external
//! labeler's output is available.

use std::collections::BTreeSet;

use crate::corpus::RuleTable;
use crate::error::{Error, Result};
use crate::eval::micro_prf;
use crate::text::segment_sentences;

/// Words that negate every concept mention after them in a sentence.
const NEGATION_CUES: &[&str] = &["no", "without"];

/// Words that mark a whole sentence as asserting normality.
const NORMALITY_CUES: &[&str] = &["normal", "unremarkable"];

/// Which side of a pair a text is on; imported labelers may index the two
/// sides separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextRole {
    Candidate,
    Reference,
}

/// Source of clinical concepts for CE scoring.
pub trait ConceptLabeler {
    /// Concepts asserted by the `index`-th text of the given role.
    fn concepts(&self, role: TextRole, index: usize, text: &str) -> BTreeSet<String>;
}

/// The built-in labeler: rule-table concept matching with the negation
/// filter.
pub struct RuleLabeler<'a>(pub &'a RuleTable);

impl ConceptLabeler for RuleLabeler<'_> {
    fn concepts(&self, _role: TextRole, _index: usize, text: &str) -> BTreeSet<String> {
        extract_concepts(text, self.0)
    }
}

/// Pre-computed concept sets loaded from an external labeler's output.
pub struct ImportedLabels {
    candidates: Vec<BTreeSet<String>>,
    references: Vec<BTreeSet<String>>,
}

impl ImportedLabels {
    /// Parses the imported-labels JSON document:
    /// `{"candidates": [["c1", ...], ...], "references": [[...], ...]}`,
    /// one concept list per corpus line.
    pub fn from_json(source: &str) -> Result<ImportedLabels> {
        #[derive(serde::Deserialize)]
        struct Doc {
            candidates: Vec<Vec<String>>,
            references: Vec<Vec<String>>,
        }
        let doc: Doc = serde_json::from_str(source)?;
        if doc.candidates.len() != doc.references.len() {
            return Err(Error::Evaluation(format!(
                "imported labels misaligned: {} candidate lists vs {} reference lists",
                doc.candidates.len(),
                doc.references.len()
            )));
        }
        Ok(ImportedLabels {
            candidates: doc.candidates.into_iter().map(to_set).collect(),
            references: doc.references.into_iter().map(to_set).collect(),
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<ImportedLabels> {
        ImportedLabels::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

fn to_set(items: Vec<String>) -> BTreeSet<String> {
    items.into_iter().collect()
}

impl ConceptLabeler for ImportedLabels {
    fn concepts(&self, role: TextRole, index: usize, _text: &str) -> BTreeSet<String> {
        let side = match role {
            TextRole::Candidate => &self.candidates,
            TextRole::Reference => &self.references,
        };
        side.get(index).cloned().unwrap_or_default()
    }
}

/// Words of a sentence with their byte offsets, lowercased and stripped of
/// punctuation, for cue checks.
fn words_with_offsets(sentence: &str) -> Vec<(usize, String)> {
    let mut words = Vec::new();
    let mut start = None;
    for (i, c) in sentence.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                words.push((s, clean_word(&sentence[s..i])));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        words.push((s, clean_word(&sentence[s..])));
    }
    words
}

fn clean_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Extracts the rule table's concepts asserted by `text`.
///
/// Matching is the same case-insensitive substring matcher used for span
/// annotation, applied per sentence; mentions suppressed by the negation
/// filter (see module docs) are not extracted.
pub fn extract_concepts(text: &str, rules: &RuleTable) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    for sentence in segment_sentences(text) {
        let lower = sentence.to_lowercase();
        let words = words_with_offsets(&lower);
        if words
            .iter()
            .any(|(_, w)| NORMALITY_CUES.contains(&w.as_str()))
        {
            continue;
        }
        for rule in rules.rules() {
            if found.contains(&rule.concept) {
                continue;
            }
            let mut search_from = 0;
            while let Some(pos) = lower[search_from..].find(&rule.concept) {
                let occurrence = search_from + pos;
                let negated = words.iter().any(|(offset, w)| {
                    *offset < occurrence && NEGATION_CUES.contains(&w.as_str())
                });
                if !negated {
                    found.insert(rule.concept.clone());
                    break;
                }
                search_from = occurrence + 1;
            }
        }
    }
    found
}

/// Precision, recall, and F1 between two concept sets.
///
/// Both empty → perfect agreement (1, 1, 1); exactly one empty → (0, 0, 0).
pub fn ce_from_sets(
    generated: &BTreeSet<String>,
    reference: &BTreeSet<String>,
) -> (f64, f64, f64) {
    micro_prf(
        generated.intersection(reference).count(),
        generated.len(),
        reference.len(),
    )
}

/// CE metrics of one generated text against one reference, using the rule
/// labeler.
pub fn ce_metrics(generated: &str, reference: &str, rules: &RuleTable) -> (f64, f64, f64) {
    ce_from_sets(
        &extract_concepts(generated, rules),
        &extract_concepts(reference, rules),
    )
}
