//! The replacement engine: deterministic, learning-free substitution of
//! pathological sentences into the normal-report template.
//!
//! Each pathological sentence arrives with an ordered label set (from the
//! span identifier, or from gold annotation). The first listed label whose
//! slot is still untouched receives the sentence; the other listed slots are
//! removed so the report does not assert normality the sentence just
//! contradicted; sentences labelled `extra` — or whose slots were all
//! already consumed — are appended after the template.

use crate::corpus::{NormalTemplate, PathologicalDescription, SpanLabel, SpanLabelSet};
use crate::error::{Error, Result};

/// What happened to one template slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotState {
    /// The template sentence still stands.
    Normal,
    /// The slot was replaced by a pathological sentence.
    Replaced(String),
    /// The slot's normal sentence was removed (its claim was superseded by
    /// a sentence placed in another slot).
    Removed,
}

/// A report being assembled: the 23 template slots in rendering order plus
/// appended extra sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDraft {
    slots: Vec<(SpanLabel, String, SlotState)>,
    extras: Vec<String>,
}

impl ReportDraft {
    /// A fresh draft: every slot normal, no extras.
    pub fn new(template: &NormalTemplate) -> ReportDraft {
        ReportDraft {
            slots: template
                .entries()
                .iter()
                .map(|(label, sentence)| (*label, sentence.clone(), SlotState::Normal))
                .collect(),
            extras: Vec::new(),
        }
    }

    /// Slots in template order.
    pub fn slots(&self) -> &[(SpanLabel, String, SlotState)] {
        &self.slots
    }

    /// Appended sentences in arrival order.
    pub fn extras(&self) -> &[String] {
        &self.extras
    }

    /// The state of one slot label.
    pub fn state(&self, label: SpanLabel) -> Option<&SlotState> {
        self.slots.iter().find(|(l, _, _)| *l == label).map(|(_, _, s)| s)
    }

    /// Folds one pathological sentence into the draft, returning the new
    /// draft; see [`apply_sentence`].
    pub fn apply(&self, sentence: &str, labels: &SpanLabelSet) -> Result<ReportDraft> {
        apply_sentence(self, sentence, labels)
    }

    /// Renders the report; see [`render_report`].
    pub fn render(&self) -> String {
        render_report(self)
    }
}

/// Applies one pathological sentence to a draft, returning a new draft.
///
/// * `{extra}` → the sentence is appended; no slot is touched.
/// * Otherwise the first listed label whose slot is still `Normal` is
///   replaced by the sentence and every other listed label still `Normal`
///   is removed. If every listed slot was already consumed, the sentence
///   is appended instead — generated findings are never dropped.
///
/// The label set must be non-empty and normalized (`extra` never mixed
/// with slot labels).
pub fn apply_sentence(
    draft: &ReportDraft,
    sentence: &str,
    labels: &SpanLabelSet,
) -> Result<ReportDraft> {
    if labels.is_empty() {
        return Err(Error::Replacement("label set must be non-empty".into()));
    }
    if !labels.is_normalized() {
        return Err(Error::Replacement(
            "label set mixes extra with slot labels".into(),
        ));
    }

    let mut next = draft.clone();
    if labels.is_extra_only() {
        next.extras.push(sentence.to_string());
        return Ok(next);
    }

    let mut target: Option<SpanLabel> = None;
    for label in labels.iter() {
        let state = draft
            .state(label)
            .expect("slot labels always resolve to a template slot");
        if *state != SlotState::Normal {
            continue;
        }
        if target.is_none() {
            target = Some(label);
        } else {
            set_state(&mut next, label, SlotState::Removed);
        }
    }
    match target {
        Some(label) => set_state(&mut next, label, SlotState::Replaced(sentence.to_string())),
        None => next.extras.push(sentence.to_string()),
    }
    Ok(next)
}

fn set_state(draft: &mut ReportDraft, label: SpanLabel, state: SlotState) {
    let slot = draft
        .slots
        .iter_mut()
        .find(|(l, _, _)| *l == label)
        .expect("slot labels always resolve to a template slot");
    slot.2 = state;
}

/// Builds the full report draft for one description.
///
/// A normal (sentinel) description leaves every slot untouched — the
/// rendered report is the verbatim template. Otherwise `spans` must supply
/// one normalized label set per sentence, and the sentences are applied in
/// order.
pub fn build_report(
    template: &NormalTemplate,
    description: &PathologicalDescription,
    spans: &[SpanLabelSet],
) -> Result<ReportDraft> {
    let mut draft = ReportDraft::new(template);
    if description.is_normal {
        return Ok(draft);
    }
    if spans.len() != description.sentences.len() {
        return Err(Error::Replacement(format!(
            "expected {} span sets, found {}",
            description.sentences.len(),
            spans.len()
        )));
    }
    for (sentence, labels) in description.sentences.iter().zip(spans) {
        draft = apply_sentence(&draft, sentence, labels)?;
    }
    Ok(draft)
}

/// Renders a draft: slot sentences in template order (replaced text where a
/// slot was replaced, nothing where it was removed), then extras, joined by
/// single spaces.
pub fn render_report(draft: &ReportDraft) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for (_, template_sentence, state) in &draft.slots {
        match state {
            SlotState::Normal => parts.push(template_sentence),
            SlotState::Replaced(sentence) => parts.push(sentence),
            SlotState::Removed => {}
        }
    }
    for extra in &draft.extras {
        parts.push(extra);
    }
    parts.join(" ")
}
