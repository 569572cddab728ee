//! Shared domain types: span labels, the normal-report template, the
//! concept-annotation rule table, and corpus records.
//!
//! Everything here is pure data. The template and rule table ship as TSV
//! files embedded in the crate (see `data/`), so callers can substitute
//! clinically vetted replacements without recompiling; loading validates the
//! structural invariants either way.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::text::normalize_ws;

/// The fixed sentence signalling an all-normal study. A description equal to
/// exactly this sentence bypasses generation and yields the verbatim
/// template.
pub const NORMAL_SENTINEL: &str = "No acute abnormality found.";

/// The tag assigned to an image on which no abnormality label fires. A tag
/// set of exactly `[NORMAL_TAG]` bypasses description generation and yields
/// [`NORMAL_SENTINEL`].
pub const NORMAL_TAG: &str = "normal";

/// Identifier of one normal-template sentence, plus the pseudo-label
/// `extra` meaning "no template sentence applies".
///
/// The vocabulary is closed: 23 slot labels and `extra`, 24 in total.
/// Construction from any other string fails with [`Error::UnknownLabel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpanLabel {
    Heart1,
    Heart2,
    Aorta1,
    Bone1,
    Lung1,
    Lung2,
    Lung3,
    Lung4,
    Lung5,
    Lung6,
    Lung7,
    Lung8,
    Lung9,
    Lung10,
    Lung11,
    Lung12,
    Lung13,
    Lung14,
    Lung15,
    Lung16,
    Lung17,
    Lung18,
    Lung19,
    Extra,
}

impl SpanLabel {
    /// Every label in canonical order: the 23 template slots in default
    /// rendering order, then `extra`.
    pub const ALL: [SpanLabel; 24] = [
        SpanLabel::Heart1,
        SpanLabel::Heart2,
        SpanLabel::Aorta1,
        SpanLabel::Bone1,
        SpanLabel::Lung1,
        SpanLabel::Lung2,
        SpanLabel::Lung3,
        SpanLabel::Lung4,
        SpanLabel::Lung5,
        SpanLabel::Lung6,
        SpanLabel::Lung7,
        SpanLabel::Lung8,
        SpanLabel::Lung9,
        SpanLabel::Lung10,
        SpanLabel::Lung11,
        SpanLabel::Lung12,
        SpanLabel::Lung13,
        SpanLabel::Lung14,
        SpanLabel::Lung15,
        SpanLabel::Lung16,
        SpanLabel::Lung17,
        SpanLabel::Lung18,
        SpanLabel::Lung19,
        SpanLabel::Extra,
    ];

    /// Number of template slots (every label except `extra`).
    pub const SLOT_COUNT: usize = 23;

    /// The label's lowercase name as used in all file formats.
    pub fn name(self) -> &'static str {
        match self {
            SpanLabel::Heart1 => "heart1",
            SpanLabel::Heart2 => "heart2",
            SpanLabel::Aorta1 => "aorta1",
            SpanLabel::Bone1 => "bone1",
            SpanLabel::Lung1 => "lung1",
            SpanLabel::Lung2 => "lung2",
            SpanLabel::Lung3 => "lung3",
            SpanLabel::Lung4 => "lung4",
            SpanLabel::Lung5 => "lung5",
            SpanLabel::Lung6 => "lung6",
            SpanLabel::Lung7 => "lung7",
            SpanLabel::Lung8 => "lung8",
            SpanLabel::Lung9 => "lung9",
            SpanLabel::Lung10 => "lung10",
            SpanLabel::Lung11 => "lung11",
            SpanLabel::Lung12 => "lung12",
            SpanLabel::Lung13 => "lung13",
            SpanLabel::Lung14 => "lung14",
            SpanLabel::Lung15 => "lung15",
            SpanLabel::Lung16 => "lung16",
            SpanLabel::Lung17 => "lung17",
            SpanLabel::Lung18 => "lung18",
            SpanLabel::Lung19 => "lung19",
            SpanLabel::Extra => "extra",
        }
    }

    /// Parses a label name; any string outside the closed vocabulary fails.
    pub fn from_name(name: &str) -> Result<SpanLabel> {
        SpanLabel::ALL
            .iter()
            .copied()
            .find(|l| l.name() == name)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// Position in [`SpanLabel::ALL`]; also the model head index.
    pub fn index(self) -> usize {
        SpanLabel::ALL.iter().position(|l| *l == self).unwrap()
    }

    /// True for the 23 labels that name a template sentence.
    pub fn is_slot(self) -> bool {
        self != SpanLabel::Extra
    }
}

impl fmt::Display for SpanLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpanLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpanLabel::from_name(s)
    }
}

impl Serialize for SpanLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SpanLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        SpanLabel::from_name(&name).map_err(D::Error::custom)
    }
}

/// An ordered, duplicate-free collection of span labels with optional
/// per-label scores.
///
/// Order is significant: the replacement engine substitutes into the first
/// listed label's slot. Model output orders labels by descending score (ties
/// by canonical label order); gold annotations keep annotation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanLabelSet {
    labels: Vec<SpanLabel>,
    scores: Option<Vec<f64>>,
}

impl SpanLabelSet {
    /// Builds a set from labels in order, dropping duplicates after their
    /// first occurrence.
    pub fn from_labels(labels: impl IntoIterator<Item = SpanLabel>) -> SpanLabelSet {
        let mut seen = BTreeSet::new();
        let labels = labels
            .into_iter()
            .filter(|l| seen.insert(*l))
            .collect();
        SpanLabelSet { labels, scores: None }
    }

    /// Builds a scored set; `labels` and `scores` are parallel and the
    /// labels must already be duplicate-free.
    pub fn from_scored(labels: Vec<SpanLabel>, scores: Vec<f64>) -> Result<SpanLabelSet> {
        if labels.len() != scores.len() {
            return Err(Error::Model(format!(
                "label/score length mismatch: {} vs {}",
                labels.len(),
                scores.len()
            )));
        }
        let mut seen = BTreeSet::new();
        if !labels.iter().all(|l| seen.insert(*l)) {
            return Err(Error::Model("duplicate label in scored set".into()));
        }
        Ok(SpanLabelSet { labels, scores: Some(scores) })
    }

    /// Applies the output normalization rule: an empty set becomes
    /// `{extra}`, and `extra` co-occurring with slot labels is dropped, so
    /// the result is never empty and never mixes `extra` with slots.
    pub fn normalized(mut self) -> SpanLabelSet {
        let has_slot = self.labels.iter().any(|l| l.is_slot());
        if has_slot {
            if let Some(pos) = self.labels.iter().position(|l| *l == SpanLabel::Extra) {
                self.labels.remove(pos);
                if let Some(scores) = &mut self.scores {
                    scores.remove(pos);
                }
            }
        } else if self.labels.is_empty() {
            self.labels.push(SpanLabel::Extra);
            if let Some(scores) = &mut self.scores {
                scores.push(1.0);
            }
        }
        self
    }

    /// True when the set is exactly `{extra}`.
    pub fn is_extra_only(&self) -> bool {
        self.labels == [SpanLabel::Extra]
    }

    /// True when the normalization rule holds: non-empty, and `extra` only
    /// ever alone.
    pub fn is_normalized(&self) -> bool {
        !self.labels.is_empty()
            && (self.is_extra_only() || self.labels.iter().all(|l| l.is_slot()))
    }

    pub fn labels(&self) -> &[SpanLabel] {
        &self.labels
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn contains(&self, label: SpanLabel) -> bool {
        self.labels.contains(&label)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = SpanLabel> + '_ {
        self.labels.iter().copied()
    }
}

/// The fixed normal report: 23 sentences, each asserting absence of one
/// tracked abnormality, in rendering order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalTemplate {
    entries: Vec<(SpanLabel, String)>,
}

impl NormalTemplate {
    /// Parses `label<TAB>sentence` lines.
    ///
    /// Fails on an unknown or duplicate label, an `extra` entry, an empty or
    /// period-less sentence (each error names the offending line), or a
    /// total other than 23 entries.
    pub fn parse(source: &str) -> Result<NormalTemplate> {
        let mut entries: Vec<(SpanLabel, String)> = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (name, sentence) = line.split_once('\t').ok_or_else(|| {
                Error::Template(format!("line {lineno}: expected `label<TAB>sentence`"))
            })?;
            let label = SpanLabel::from_name(name.trim())
                .map_err(|_| Error::Template(format!("line {lineno}: unknown label {name:?}")))?;
            if label == SpanLabel::Extra {
                return Err(Error::Template(format!(
                    "line {lineno}: extra has no template slot"
                )));
            }
            if entries.iter().any(|(l, _)| *l == label) {
                return Err(Error::Template(format!(
                    "line {lineno}: duplicate label {label}"
                )));
            }
            let sentence = normalize_ws(sentence);
            if sentence.is_empty() {
                return Err(Error::Template(format!("line {lineno}: empty sentence")));
            }
            if !sentence.ends_with('.') {
                return Err(Error::Template(format!(
                    "line {lineno}: sentence must end with a period"
                )));
            }
            entries.push((label, sentence));
        }
        if entries.len() != SpanLabel::SLOT_COUNT {
            return Err(Error::Template(format!(
                "expected {} entries, found {}",
                SpanLabel::SLOT_COUNT,
                entries.len()
            )));
        }
        Ok(NormalTemplate { entries })
    }

    /// Loads and validates a template file.
    pub fn load(path: impl AsRef<Path>) -> Result<NormalTemplate> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| {
            Error::Template(format!("cannot read {}: {e}", path.display()))
        })?;
        NormalTemplate::parse(&source)
    }

    /// The template shipped with the crate. Two sentences (heart1, lung14)
    /// are fixed by convention; the rest are standard normal findings, one
    /// per slot.
    pub fn default_template() -> NormalTemplate {
        NormalTemplate::parse(include_str!("../data/normal_template.tsv"))
            .expect("embedded template is valid")
    }

    /// Entries in rendering order.
    pub fn entries(&self) -> &[(SpanLabel, String)] {
        &self.entries
    }

    /// The sentence for a slot label, if the label is a slot. Total on all
    /// 23 slot labels by the entry-count and uniqueness invariants.
    pub fn sentence(&self, label: SpanLabel) -> Option<&str> {
        self.entries
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, s)| s.as_str())
    }

    /// The full normal report: all 23 sentences joined by single spaces.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(_, s)| s.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Serializes back to the `label<TAB>sentence` file format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (label, sentence) in &self.entries {
            out.push_str(label.name());
            out.push('\t');
            out.push_str(sentence);
            out.push('\n');
        }
        out
    }
}

/// One concept-annotation rule: any mention of `concept` marks the listed
/// slot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// Lowercase, whitespace-normalized concept phrase.
    pub concept: String,
    /// Slot labels the concept maps to; never contains `extra`.
    pub labels: Vec<SpanLabel>,
}

/// The ordered concept → span-label rule table used for gold span
/// annotation and for concept extraction in evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleTable {
    rules: Vec<Rule>,
}

impl RuleTable {
    /// Parses `concept<TAB>label,label,...` lines. Fails on a duplicate
    /// concept (after lowercasing and whitespace normalization), an unknown
    /// label, or `extra` as a target.
    pub fn parse(source: &str) -> Result<RuleTable> {
        let mut rules: Vec<Rule> = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (concept, labels) = line.split_once('\t').ok_or_else(|| {
                Error::Rules(format!("line {lineno}: expected `concept<TAB>labels`"))
            })?;
            let concept = normalize_ws(concept).to_lowercase();
            if concept.is_empty() {
                return Err(Error::Rules(format!("line {lineno}: empty concept")));
            }
            if rules.iter().any(|r| r.concept == concept) {
                return Err(Error::Rules(format!(
                    "line {lineno}: duplicate concept {concept:?}"
                )));
            }
            let mut parsed = Vec::new();
            for name in labels.split(',') {
                let label = SpanLabel::from_name(name.trim()).map_err(|_| {
                    Error::Rules(format!("line {lineno}: unknown label {:?}", name.trim()))
                })?;
                if label == SpanLabel::Extra {
                    return Err(Error::Rules(format!(
                        "line {lineno}: extra is not a rule target"
                    )));
                }
                if !parsed.contains(&label) {
                    parsed.push(label);
                }
            }
            if parsed.is_empty() {
                return Err(Error::Rules(format!("line {lineno}: no labels")));
            }
            rules.push(Rule { concept, labels: parsed });
        }
        Ok(RuleTable { rules })
    }

    /// Loads and validates a rule file.
    pub fn load(path: impl AsRef<Path>) -> Result<RuleTable> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Rules(format!("cannot read {}: {e}", path.display())))?;
        RuleTable::parse(&source)
    }

    /// The 30-concept rule table shipped with the crate.
    pub fn default_rules() -> RuleTable {
        RuleTable::parse(include_str!("../data/annotation_rules.tsv"))
            .expect("embedded rule table is valid")
    }

    /// Rules in file order.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Rules whose concept is mentioned in `text`.
    ///
    /// Matching is case-insensitive substring search on
    /// whitespace-normalized text, so multi-word concepts match when their
    /// words appear contiguously.
    pub fn matching_rules(&self, text: &str) -> Vec<&Rule> {
        let haystack = normalize_ws(text).to_lowercase();
        self.rules
            .iter()
            .filter(|r| haystack.contains(&r.concept))
            .collect()
    }

    /// Ordered union of slot labels over all matching concepts; empty when
    /// nothing matches.
    pub fn match_labels(&self, text: &str) -> Vec<SpanLabel> {
        let mut labels = Vec::new();
        for rule in self.matching_rules(text) {
            for label in &rule.labels {
                if !labels.contains(label) {
                    labels.push(*label);
                }
            }
        }
        labels
    }
}

/// One study: identifier, optional image, tags, and the two report
/// sections. Findings and impression may each be empty, but not both.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub id: String,
    pub image_ref: Option<String>,
    pub tags: Vec<String>,
    pub findings: String,
    pub impression: String,
}

/// The subset of a report describing abnormal findings, or the normal
/// sentinel.
///
/// `is_normal` is true exactly when `sentences` equals
/// `[`[`NORMAL_SENTINEL`]`]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologicalDescription {
    pub sentences: Vec<String>,
    pub is_normal: bool,
}

impl PathologicalDescription {
    /// The sentinel description for an all-normal study.
    pub fn normal() -> PathologicalDescription {
        PathologicalDescription {
            sentences: vec![NORMAL_SENTINEL.to_string()],
            is_normal: true,
        }
    }

    /// Wraps abnormal sentences; an empty list (or exactly the sentinel
    /// sentence) yields the normal description, keeping the
    /// `is_normal ⇔ sentences = [sentinel]` invariant.
    pub fn from_sentences(sentences: Vec<String>) -> PathologicalDescription {
        if sentences.is_empty() || sentences == [NORMAL_SENTINEL] {
            PathologicalDescription::normal()
        } else {
            PathologicalDescription { sentences, is_normal: false }
        }
    }

    /// All sentences joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// One line of a corpus file. Field names are part of the on-disk format
/// and must not change.
///
/// `pathological` and `span_labels` are derived annotations; they are empty
/// on raw corpora and populated by dataset derivation (or synthesis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub image: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub findings: String,
    #[serde(default)]
    pub impression: String,
    #[serde(default)]
    pub pathological: Vec<String>,
    #[serde(default)]
    pub span_labels: BTreeMap<String, Vec<SpanLabel>>,
}

impl CorpusRecord {
    /// Projects the record onto the raw-report view.
    pub fn to_report(&self) -> Report {
        Report {
            id: self.id.clone(),
            image_ref: self.image.clone(),
            tags: self.tags.clone(),
            findings: self.findings.clone(),
            impression: self.impression.clone(),
        }
    }
}

/// Reads a line-delimited corpus file, enforcing unique ids and the
/// "findings and impression not both empty" invariant.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path)
        .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for (lineno, line) in source.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(line)
            .map_err(|e| Error::Dataset(format!("line {lineno}: {e}")))?;
        if !ids.insert(record.id.clone()) {
            return Err(Error::Dataset(format!(
                "line {lineno}: duplicate id {:?}",
                record.id
            )));
        }
        if record.findings.trim().is_empty() && record.impression.trim().is_empty() {
            return Err(Error::Dataset(format!(
                "line {lineno}: record {:?} has neither findings nor impression",
                record.id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records as one JSON object per line.
pub fn save_corpus(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_vocabulary_is_closed_and_24_strong() {
        assert_eq!(SpanLabel::ALL.len(), 24);
        for label in SpanLabel::ALL {
            assert_eq!(SpanLabel::from_name(label.name()).unwrap(), label);
        }
        assert!(SpanLabel::from_name("lung20").is_err());
        assert!(SpanLabel::from_name("Heart1").is_err());
        assert!(SpanLabel::from_name("").is_err());
    }

    #[test]
    fn extra_is_the_only_slotless_label() {
        let slotless: Vec<_> = SpanLabel::ALL.iter().filter(|l| !l.is_slot()).collect();
        assert_eq!(slotless, vec![&SpanLabel::Extra]);
    }

    #[test]
    fn label_serde_round_trips_as_lowercase_names() {
        let json = serde_json::to_string(&SpanLabel::Lung14).unwrap();
        assert_eq!(json, "\"lung14\"");
        let back: SpanLabel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SpanLabel::Lung14);
        assert!(serde_json::from_str::<SpanLabel>("\"lung99\"").is_err());
    }

    #[test]
    fn default_template_has_23_unique_period_terminated_entries() {
        let template = NormalTemplate::default_template();
        assert_eq!(template.entries().len(), 23);
        let mut labels: Vec<_> = template.entries().iter().map(|(l, _)| *l).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 23);
        for (_, sentence) in template.entries() {
            assert!(sentence.ends_with('.'));
            assert!(!sentence.is_empty());
        }
    }

    #[test]
    fn default_template_fixes_the_two_known_sentences() {
        let template = NormalTemplate::default_template();
        assert_eq!(
            template.sentence(SpanLabel::Heart1),
            Some("Heart size is within normal limits.")
        );
        assert_eq!(
            template.sentence(SpanLabel::Lung14),
            Some("No evidence of hernia.")
        );
    }

    #[test]
    fn every_slot_label_resolves_to_exactly_one_sentence() {
        let template = NormalTemplate::default_template();
        for label in SpanLabel::ALL.iter().filter(|l| l.is_slot()) {
            assert!(template.sentence(*label).is_some(), "{label} unresolved");
        }
        assert_eq!(template.sentence(SpanLabel::Extra), None);
    }

    #[test]
    fn template_round_trips_through_tsv() {
        let template = NormalTemplate::default_template();
        let reparsed = NormalTemplate::parse(&template.to_tsv()).unwrap();
        assert_eq!(reparsed, template);
    }

    #[test]
    fn short_template_reports_entry_count() {
        let mut tsv = NormalTemplate::default_template().to_tsv();
        tsv = tsv.lines().take(22).collect::<Vec<_>>().join("\n");
        let err = NormalTemplate::parse(&tsv).unwrap_err();
        assert_eq!(err.to_string(), "template: expected 23 entries, found 22");
    }

    #[test]
    fn template_rejects_duplicates_unknowns_and_extra() {
        let dup = "heart1\tA.\nheart1\tB.\n";
        assert!(NormalTemplate::parse(dup)
            .unwrap_err()
            .to_string()
            .contains("duplicate label heart1"));

        let unknown = "heartX\tA.\n";
        assert!(NormalTemplate::parse(unknown)
            .unwrap_err()
            .to_string()
            .contains("unknown label"));

        let extra = "extra\tA.\n";
        assert!(NormalTemplate::parse(extra)
            .unwrap_err()
            .to_string()
            .contains("extra has no template slot"));

        let no_period = "heart1\tA\n";
        assert!(NormalTemplate::parse(no_period)
            .unwrap_err()
            .to_string()
            .contains("must end with a period"));
    }

    #[test]
    fn default_rules_cover_30_concepts() {
        let rules = RuleTable::default_rules();
        assert_eq!(rules.rules().len(), 30);
        for rule in rules.rules() {
            assert!(!rule.labels.is_empty());
            assert!(rule.labels.iter().all(|l| l.is_slot()));
            assert_eq!(rule.concept, normalize_ws(&rule.concept).to_lowercase());
        }
    }

    #[test]
    fn rule_lookup_is_case_insensitive_substring() {
        let rules = RuleTable::default_rules();
        assert_eq!(
            rules.match_labels("Stable CARDIOMEGALY persists."),
            vec![SpanLabel::Heart1]
        );
        assert_eq!(
            rules.match_labels("mild consolidation"),
            vec![SpanLabel::Lung1, SpanLabel::Lung5, SpanLabel::Lung13]
        );
        // Multi-word concepts match only when contiguous after
        // whitespace normalization.
        assert_eq!(
            rules.match_labels("costophrenic   blunting on the left"),
            vec![SpanLabel::Lung2, SpanLabel::Lung15]
        );
        assert!(rules.match_labels("costophrenic angles are sharp").is_empty());
        assert!(rules.match_labels("nothing relevant here").is_empty());
    }

    #[test]
    fn rule_table_rejects_extra_target_and_duplicates() {
        let err = RuleTable::parse("nodule\textra\n").unwrap_err();
        assert_eq!(err.to_string(), "rules: line 1: extra is not a rule target");

        let err = RuleTable::parse("nodule\tlung1\nNodule\tlung8\n").unwrap_err();
        assert!(err.to_string().contains("duplicate concept"));

        let err = RuleTable::parse("nodule\tlungX\n").unwrap_err();
        assert!(err.to_string().contains("unknown label"));
    }

    #[test]
    fn span_label_set_dedups_and_preserves_order() {
        let set = SpanLabelSet::from_labels([
            SpanLabel::Lung14,
            SpanLabel::Heart1,
            SpanLabel::Lung14,
        ]);
        assert_eq!(set.labels(), [SpanLabel::Lung14, SpanLabel::Heart1]);
    }

    #[test]
    fn normalization_never_mixes_extra_with_slots() {
        let empty = SpanLabelSet::from_labels([]).normalized();
        assert!(empty.is_extra_only());

        let mixed =
            SpanLabelSet::from_labels([SpanLabel::Extra, SpanLabel::Heart1]).normalized();
        assert_eq!(mixed.labels(), [SpanLabel::Heart1]);

        let alone = SpanLabelSet::from_labels([SpanLabel::Extra]).normalized();
        assert!(alone.is_extra_only());
        assert!(alone.is_normalized());
    }

    #[test]
    fn sentinel_description_invariant() {
        let normal = PathologicalDescription::normal();
        assert!(normal.is_normal);
        assert_eq!(normal.sentences, vec![NORMAL_SENTINEL]);

        assert!(PathologicalDescription::from_sentences(vec![]).is_normal);
        assert!(
            PathologicalDescription::from_sentences(vec![NORMAL_SENTINEL.into()]).is_normal
        );
        let abnormal = PathologicalDescription::from_sentences(vec![
            "There is cardiomegaly.".into(),
        ]);
        assert!(!abnormal.is_normal);
    }

    #[test]
    fn corpus_round_trip_preserves_all_fields() {
        let record = CorpusRecord {
            id: "r1".into(),
            image: Some("images/r1.png".into()),
            tags: vec!["cardiomegaly".into()],
            findings: "Stable cardiomegaly.".into(),
            impression: "Cardiomegaly.".into(),
            pathological: vec!["Stable cardiomegaly.".into()],
            span_labels: BTreeMap::from([(
                "Stable cardiomegaly.".to_string(),
                vec![SpanLabel::Heart1],
            )]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&path, &[record.clone()]).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded, vec![record]);
    }

    #[test]
    fn corpus_load_rejects_duplicate_ids_and_empty_reports() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");

        let line = r#"{"id":"a","image":null,"tags":[],"findings":"F.","impression":""}"#;
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        assert!(load_corpus(&path).unwrap_err().to_string().contains("duplicate id"));

        let empty = r#"{"id":"a","image":null,"tags":[],"findings":"","impression":""}"#;
        std::fs::write(&path, format!("{empty}\n")).unwrap();
        assert!(load_corpus(&path)
            .unwrap_err()
            .to_string()
            .contains("neither findings nor impression"));
    }
}
