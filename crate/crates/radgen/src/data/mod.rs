//! Derivation of the three training datasets from a report corpus.
//!
//! A corpus record carries raw text (findings, impression) plus derived
//! annotations. This module produces, from a corpus:
//!
//! 1. tagger examples — (image, tag set) pairs;
//! 2. tag → pathological-description pairs for the generator;
//! 3. sentence → span-label pairs for the span identifier.
//!
//! Pathological descriptions are recovered by a small bag-of-words
//! sentence-polarity classifier trained on the corpus's own sentence
//! annotations; span labels come from the concept rule table where a
//! record does not carry gold labels.

mod synth;

pub use synth::{default_tag_vocab, synth_span_sentences, synthesize_corpus, SynthSpec};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    CorpusRecord, PathologicalDescription, Report, RuleTable, SpanLabel, SpanLabelSet,
};
use crate::error::{Error, Result};
use crate::eval::tokenize;
use crate::text::segment_sentences;

/// Whether a sentence reports an abnormal finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Normal,
    Abnormal,
}

/// One labeled sentence for polarity training. Span labels may only
/// accompany abnormal sentences, so construction goes through the three
/// named constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    text: String,
    polarity: Polarity,
    span_labels: Option<SpanLabelSet>,
}

impl SentenceRecord {
    pub fn normal(text: impl Into<String>) -> SentenceRecord {
        SentenceRecord {
            text: text.into(),
            polarity: Polarity::Normal,
            span_labels: None,
        }
    }

    pub fn abnormal(text: impl Into<String>) -> SentenceRecord {
        SentenceRecord {
            text: text.into(),
            polarity: Polarity::Abnormal,
            span_labels: None,
        }
    }

    pub fn abnormal_with_spans(text: impl Into<String>, spans: SpanLabelSet) -> SentenceRecord {
        SentenceRecord {
            text: text.into(),
            polarity: Polarity::Abnormal,
            span_labels: Some(spans),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn span_labels(&self) -> Option<&SpanLabelSet> {
        self.span_labels.as_ref()
    }
}

/// Hyperparameters for polarity training: full-batch gradient descent on
/// logistic loss over bag-of-words counts.
#[derive(Debug, Clone)]
pub struct PolarityConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for PolarityConfig {
    fn default() -> PolarityConfig {
        PolarityConfig {
            epochs: 500,
            learning_rate: 1.0,
        }
    }
}

/// Bag-of-words logistic-regression sentence classifier.
#[derive(Debug, Clone)]
pub struct PolarityModel {
    vocab: BTreeMap<String, usize>,
    weights: Vec<f64>,
    bias: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl PolarityModel {
    /// Sparse token-count features over the known vocabulary.
    fn features(&self, sentence: &str) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for token in tokenize(sentence) {
            if let Some(&idx) = self.vocab.get(&token) {
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        counts.into_iter().collect()
    }

    /// Probability that the sentence is abnormal.
    pub fn score(&self, sentence: &str) -> f64 {
        let z: f64 = self
            .features(sentence)
            .iter()
            .map(|&(idx, count)| self.weights[idx] * count)
            .sum::<f64>()
            + self.bias;
        sigmoid(z)
    }

    pub fn predict(&self, sentence: &str) -> Polarity {
        if self.score(sentence) >= 0.5 {
            Polarity::Abnormal
        } else {
            Polarity::Normal
        }
    }
}

/// Trains the polarity classifier. Refuses single-class data: a usable
/// decision boundary needs both normal and abnormal examples.
pub fn train_sentence_polarity_classifier(
    data: &[SentenceRecord],
    config: &PolarityConfig,
) -> Result<PolarityModel> {
    let abnormal = data
        .iter()
        .filter(|r| r.polarity == Polarity::Abnormal)
        .count();
    let normal = data.len() - abnormal;
    if normal == 0 || abnormal == 0 {
        return Err(Error::Dataset(format!(
            "polarity training needs both classes; found {normal} normal and \
             {abnormal} abnormal sentences"
        )));
    }

    let tokens: BTreeSet<String> = data.iter().flat_map(|r| tokenize(&r.text)).collect();
    let vocab: BTreeMap<String, usize> = tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let mut model = PolarityModel {
        weights: vec![0.0; vocab.len()],
        bias: 0.0,
        vocab,
    };

    let features: Vec<Vec<(usize, f64)>> =
        data.iter().map(|r| model.features(&r.text)).collect();
    let targets: Vec<f64> = data
        .iter()
        .map(|r| (r.polarity == Polarity::Abnormal) as u8 as f64)
        .collect();

    let n = data.len() as f64;
    for _ in 0..config.epochs {
        let mut grad_w = vec![0.0; model.weights.len()];
        let mut grad_b = 0.0;
        for (feats, &y) in features.iter().zip(&targets) {
            let z: f64 = feats
                .iter()
                .map(|&(idx, c)| model.weights[idx] * c)
                .sum::<f64>()
                + model.bias;
            let err = sigmoid(z) - y;
            for &(idx, c) in feats {
                grad_w[idx] += err * c;
            }
            grad_b += err;
        }
        let step = config.learning_rate / n;
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= step * g;
        }
        model.bias -= step * grad_b;
    }
    Ok(model)
}

/// Collects the abnormal-classified sentences of a report: findings first,
/// then impression, original order, deduplicated by exact text. A report
/// with no abnormal sentence yields the normal sentinel description.
pub fn extract_pathological_description(
    report: &Report,
    model: &PolarityModel,
) -> PathologicalDescription {
    let mut sentences: Vec<String> = Vec::new();
    for section in [&report.findings, &report.impression] {
        for sentence in segment_sentences(section) {
            if model.predict(&sentence) == Polarity::Abnormal
                && !sentences.contains(&sentence)
            {
                sentences.push(sentence);
            }
        }
    }
    PathologicalDescription::from_sentences(sentences)
}

/// Labels one sentence with the union of labels of every matching concept
/// rule; a sentence matching no rule gets exactly `{extra}`.
pub fn annotate_span_labels(sentence: &str, rules: &RuleTable) -> SpanLabelSet {
    SpanLabelSet::from_labels(rules.match_labels(sentence)).normalized()
}

/// One (tag sequence, description) pair per report, preserving corpus tag
/// order. Reports without tags are skipped with a warning.
pub fn build_tag_description_pairs(
    corpus: &[CorpusRecord],
    model: &PolarityModel,
) -> Vec<(Vec<String>, PathologicalDescription)> {
    let mut pairs = Vec::new();
    for record in corpus {
        if record.tags.is_empty() {
            log::warn!("record {} has no tags; skipped", record.id);
            continue;
        }
        let description = extract_pathological_description(&record.to_report(), model);
        pairs.push((record.tags.clone(), description));
    }
    pairs
}

/// Disjoint train/validation/test record-id lists covering a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl CorpusSplit {
    /// Records of `corpus` whose ids are in `ids`, in `ids` order.
    pub fn select<'a>(corpus: &'a [CorpusRecord], ids: &[String]) -> Vec<&'a CorpusRecord> {
        let by_id: BTreeMap<&str, &CorpusRecord> =
            corpus.iter().map(|r| (r.id.as_str(), r)).collect();
        ids.iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect()
    }
}

/// Shuffles record ids with a seeded generator and cuts them into the three
/// requested partitions. The counts must sum to the corpus size.
pub fn split_corpus(
    corpus: &[CorpusRecord],
    counts: (usize, usize, usize),
    seed: u64,
) -> Result<CorpusSplit> {
    let (train, val, test) = counts;
    let total = train + val + test;
    if total != corpus.len() {
        return Err(Error::Dataset(format!(
            "split counts sum to {total}, corpus has {} records",
            corpus.len()
        )));
    }
    let mut ids: Vec<String> = corpus.iter().map(|r| r.id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let test_ids = ids.split_off(train + val);
    let val_ids = ids.split_off(train);
    Ok(CorpusSplit {
        train: ids,
        val: val_ids,
        test: test_ids,
    })
}

/// Per-tag occurrence counts, most frequent first (ties alphabetical).
pub fn corpus_stats(corpus: &[CorpusRecord]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for record in corpus {
        for tag in &record.tags {
            *counts.entry(tag).or_insert(0) += 1;
        }
    }
    let mut stats: Vec<(String, usize)> =
        counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    stats.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    stats
}

/// Renders a frequency table as two aligned columns.
pub fn stats_table(stats: &[(String, usize)]) -> String {
    let width = stats.iter().map(|(t, _)| t.len()).max().unwrap_or(0).max(3);
    let mut out = String::new();
    for (tag, count) in stats {
        out.push_str(&format!("{tag:<width$}  {count}\n"));
    }
    out
}

/// One tagger training example: which tags an image carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerExample {
    pub id: String,
    pub image: String,
    pub tags: Vec<String>,
}

/// One generator training example: serialized-ready tag sequence and the
/// description sentences (the sentinel for all-normal studies).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExample {
    pub id: String,
    pub tags: Vec<String>,
    pub description: Vec<String>,
}

/// One span-identifier training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanExample {
    pub sentence: String,
    pub labels: Vec<SpanLabel>,
}

/// The three derived training datasets.
#[derive(Debug, Clone, Default)]
pub struct DerivedDatasets {
    pub tagger: Vec<TaggerExample>,
    pub pairs: Vec<PairExample>,
    pub spans: Vec<SpanExample>,
}

/// Runs the whole derivation over a corpus:
///
/// 1. labels every findings/impression sentence by membership in the
///    record's `pathological` list and trains the polarity classifier;
/// 2. collects tagger examples from records that have both image and tags;
/// 3. extracts tag → description pairs with the trained classifier;
/// 4. collects unique pathological sentences with their span labels (gold
///    where the record carries them, rule-annotated otherwise).
pub fn derive_datasets(
    corpus: &[CorpusRecord],
    rules: &RuleTable,
    config: &PolarityConfig,
) -> Result<DerivedDatasets> {
    // Unique sentences; a sentence listed as pathological anywhere is
    // abnormal everywhere.
    let mut polarity: BTreeMap<String, bool> = BTreeMap::new();
    for record in corpus {
        let pathological: BTreeSet<&str> =
            record.pathological.iter().map(String::as_str).collect();
        for section in [&record.findings, &record.impression] {
            for sentence in segment_sentences(section) {
                let abnormal = pathological.contains(sentence.as_str());
                *polarity.entry(sentence).or_insert(false) |= abnormal;
            }
        }
    }
    let labeled: Vec<SentenceRecord> = polarity
        .iter()
        .map(|(text, &abnormal)| {
            if abnormal {
                SentenceRecord::abnormal(text.clone())
            } else {
                SentenceRecord::normal(text.clone())
            }
        })
        .collect();
    let model = train_sentence_polarity_classifier(&labeled, config)?;

    let mut datasets = DerivedDatasets::default();
    for record in corpus {
        match (&record.image, record.tags.is_empty()) {
            (Some(image), false) => datasets.tagger.push(TaggerExample {
                id: record.id.clone(),
                image: image.clone(),
                tags: record.tags.clone(),
            }),
            (None, false) => log::warn!("record {} has no image; tagger skips it", record.id),
            _ => {}
        }

        if record.tags.is_empty() {
            log::warn!("record {} has no tags; skipped", record.id);
            continue;
        }
        let description = extract_pathological_description(&record.to_report(), &model);
        datasets.pairs.push(PairExample {
            id: record.id.clone(),
            tags: record.tags.clone(),
            description: description.sentences,
        });
    }

    let mut seen = BTreeSet::new();
    for record in corpus {
        for sentence in &record.pathological {
            if !seen.insert(sentence.clone()) {
                continue;
            }
            let labels = match record.span_labels.get(sentence) {
                Some(gold) => gold.clone(),
                None => annotate_span_labels(sentence, rules).labels().to_vec(),
            };
            datasets.spans.push(SpanExample {
                sentence: sentence.clone(),
                labels,
            });
        }
    }
    Ok(datasets)
}

/// Writes items as one JSON object per line.
pub fn save_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`save_jsonl`].
pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut items = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line)?);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SpanLabel::*;

    fn toy_training_set() -> Vec<SentenceRecord> {
        vec![
            SentenceRecord::normal("Heart size is normal."),
            SentenceRecord::normal("No pneumothorax."),
            SentenceRecord::normal("No pleural effusion or pneumothorax."),
            SentenceRecord::normal("The lungs are clear."),
            SentenceRecord::normal("Pulmonary vasculature appears normal."),
            SentenceRecord::normal("There is no focal air space consolidation."),
            SentenceRecord::abnormal(
                "There is a 1 cm nodule within one of the lung bases, seen only on the lateral view.",
            ),
            SentenceRecord::abnormal(
                "There is a calcified right hilar lymph node and right granuloma.",
            ),
            SentenceRecord::abnormal(
                "Extensive left upper quadrant splenic calcification may reflect old granulomatous disease",
            ),
            SentenceRecord::abnormal("There are degenerative changes of the spine."),
        ]
    }

    fn toy_model() -> PolarityModel {
        train_sentence_polarity_classifier(&toy_training_set(), &PolarityConfig::default())
            .unwrap()
    }

    #[test]
    fn polarity_training_memorizes_a_separable_toy_set() {
        let data = toy_training_set();
        let model = toy_model();
        for record in &data {
            assert_eq!(
                model.predict(record.text()),
                record.polarity(),
                "misclassified: {}",
                record.text()
            );
        }
    }

    #[test]
    fn polarity_examples_classify_as_expected() {
        let model = toy_model();
        assert_eq!(
            model.predict("No pleural effusion or pneumothorax."),
            Polarity::Normal
        );
        assert_eq!(
            model.predict("There is a calcified right hilar lymph node and right granuloma."),
            Polarity::Abnormal
        );
    }

    #[test]
    fn single_class_data_is_refused() {
        let data = vec![
            SentenceRecord::normal("The lungs are clear."),
            SentenceRecord::normal("No pneumothorax."),
        ];
        let err =
            train_sentence_polarity_classifier(&data, &PolarityConfig::default()).unwrap_err();
        assert!(err.to_string().contains("both classes"), "{err}");
    }

    #[test]
    fn extraction_keeps_abnormal_sentences_in_order() {
        let model = toy_model();
        let report = Report {
            id: "r2".into(),
            image_ref: None,
            tags: vec!["nodule".into()],
            findings: "There is a 1 cm nodule within one of the lung bases, seen only on \
                       the lateral view. There is a calcified right hilar lymph node and \
                       right granuloma. Heart size is normal. No pneumothorax."
                .into(),
            impression: String::new(),
        };
        let description = extract_pathological_description(&report, &model);
        assert!(!description.is_normal);
        assert_eq!(description.sentences.len(), 2);
        assert!(description.sentences[0].starts_with("There is a 1 cm nodule"));
        assert!(description.sentences[1].starts_with("There is a calcified"));
    }

    #[test]
    fn extraction_orders_findings_before_impression_and_dedups() {
        let model = toy_model();
        let report = Report {
            id: "r".into(),
            image_ref: None,
            tags: vec![],
            findings: "There is a calcified right hilar lymph node and right granuloma. \
                       Heart size is normal."
                .into(),
            impression: "There is a calcified right hilar lymph node and right granuloma. \
                         There are degenerative changes of the spine."
                .into(),
        };
        let description = extract_pathological_description(&report, &model);
        assert_eq!(description.sentences.len(), 2);
        assert!(description.sentences[0].starts_with("There is a calcified"));
        assert!(description.sentences[1].starts_with("There are degenerative"));
    }

    #[test]
    fn all_normal_report_extracts_the_sentinel() {
        let model = toy_model();
        let report = Report {
            id: "n".into(),
            image_ref: None,
            tags: vec!["normal".into()],
            findings: "Heart size is normal. The lungs are clear.".into(),
            impression: "No pneumothorax.".into(),
        };
        let description = extract_pathological_description(&report, &model);
        assert!(description.is_normal);
        assert_eq!(description.sentences, [crate::corpus::NORMAL_SENTINEL]);
    }

    #[test]
    fn extracted_sentences_always_classify_abnormal() {
        let model = toy_model();
        let report = Report {
            id: "p".into(),
            image_ref: None,
            tags: vec![],
            findings: "The lungs are clear. There are degenerative changes of the spine. \
                       No pneumothorax."
                .into(),
            impression: "Heart size is normal.".into(),
        };
        let description = extract_pathological_description(&report, &model);
        for sentence in &description.sentences {
            assert_eq!(model.predict(sentence), Polarity::Abnormal);
        }
    }

    #[test]
    fn annotation_unions_matching_rules() {
        let rules = RuleTable::default_rules();
        let set = annotate_span_labels("Stable cardiomegaly with large hiatal hernia.", &rules);
        assert!(set.contains(Heart1));
        assert!(!set.contains(Extra));
    }

    #[test]
    fn annotation_defaults_to_extra() {
        let rules = RuleTable::default_rules();
        let set = annotate_span_labels("Multiple surgical clips are noted.", &rules);
        assert_eq!(set.labels(), [Extra]);
    }

    #[test]
    fn annotation_with_a_custom_rule_table() {
        let rules = RuleTable::parse("aorta\taorta1\n").unwrap();
        let set = annotate_span_labels("The thoracic aorta is tortuous and calcified.", &rules);
        assert_eq!(set.labels(), [Aorta1]);
    }

    #[test]
    fn every_rule_concept_maps_to_a_superset_of_its_labels() {
        let rules = RuleTable::default_rules();
        assert_eq!(rules.rules().len(), 30);
        for rule in rules.rules() {
            let sentence = format!("Findings show {}.", rule.concept);
            let set = annotate_span_labels(&sentence, &rules);
            for label in &rule.labels {
                assert!(
                    set.contains(*label),
                    "concept {:?}: {:?} missing from {:?}",
                    rule.concept,
                    label,
                    set.labels()
                );
            }
        }
    }

    #[test]
    fn adding_a_concept_occurrence_never_removes_labels() {
        let rules = RuleTable::default_rules();
        let bases = [
            "Multiple surgical clips are noted.",
            "Stable cardiomegaly is seen.",
            "There is focal consolidation in the left base.",
        ];
        for base in bases {
            let before = annotate_span_labels(base, &rules);
            for rule in rules.rules() {
                let modified = format!(
                    "{}, with {}.",
                    base.trim_end_matches('.'),
                    rule.concept
                );
                let after = annotate_span_labels(&modified, &rules);
                for label in before.iter().filter(|l| *l != Extra) {
                    assert!(after.contains(label), "{modified}: lost {label}");
                }
                assert!(!after.contains(Extra), "{modified}: still extra");
            }
        }
    }

    fn tiny_corpus() -> Vec<CorpusRecord> {
        let abnormal = "There is a calcified right hilar lymph node and right granuloma.";
        let mut span_labels = BTreeMap::new();
        span_labels.insert(abnormal.to_string(), vec![Lung1]);
        vec![
            CorpusRecord {
                id: "a".into(),
                image: Some("a.png".into()),
                tags: vec!["granuloma".into()],
                findings: format!("{abnormal} Heart size is normal."),
                impression: String::new(),
                pathological: vec![abnormal.into()],
                span_labels,
            },
            CorpusRecord {
                id: "b".into(),
                image: Some("b.png".into()),
                tags: vec!["normal".into()],
                findings: "Heart size is normal. The lungs are clear.".into(),
                impression: "No pneumothorax.".into(),
                pathological: vec![],
                span_labels: BTreeMap::new(),
            },
            CorpusRecord {
                id: "c".into(),
                image: None,
                tags: vec!["spine".into(), "degenerative".into()],
                findings: "There are degenerative changes of the spine. No pneumothorax."
                    .into(),
                impression: String::new(),
                pathological: vec!["There are degenerative changes of the spine.".into()],
                span_labels: BTreeMap::new(),
            },
        ]
    }

    #[test]
    fn pair_building_yields_one_pair_per_tagged_report() {
        let corpus = tiny_corpus();
        let model = toy_model();
        let pairs = build_tag_description_pairs(&corpus, &model);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].0, ["granuloma"]);
        assert!(!pairs[0].1.is_normal);
        assert!(pairs[1].1.is_normal);
    }

    #[test]
    fn untagged_reports_are_skipped() {
        let mut corpus = tiny_corpus();
        corpus[2].tags.clear();
        let model = toy_model();
        let pairs = build_tag_description_pairs(&corpus, &model);
        assert_eq!(pairs.len(), 2);
    }

    #[test]
    fn derivation_produces_all_three_datasets() {
        let corpus = tiny_corpus();
        let datasets = derive_datasets(
            &corpus,
            &RuleTable::default_rules(),
            &PolarityConfig::default(),
        )
        .unwrap();
        // Record c has no image, so only two tagger examples.
        assert_eq!(datasets.tagger.len(), 2);
        assert_eq!(datasets.pairs.len(), 3);
        assert_eq!(datasets.spans.len(), 2);
        // Gold labels win over rule annotation.
        assert_eq!(datasets.spans[0].labels, [Lung1]);
        // Rule annotation fills in where gold is absent.
        assert_eq!(datasets.spans[1].labels, [Bone1]);
        // The normal record contributes the sentinel pair.
        let normal_pair = datasets.pairs.iter().find(|p| p.id == "b").unwrap();
        assert_eq!(normal_pair.description, [crate::corpus::NORMAL_SENTINEL]);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let corpus: Vec<CorpusRecord> = (0..10)
            .map(|i| CorpusRecord {
                id: format!("r{i}"),
                image: None,
                tags: vec!["t".into()],
                findings: "The lungs are clear.".into(),
                impression: String::new(),
                pathological: vec![],
                span_labels: BTreeMap::new(),
            })
            .collect();
        let first = split_corpus(&corpus, (5, 2, 3), 11).unwrap();
        let second = split_corpus(&corpus, (5, 2, 3), 11).unwrap();
        assert_eq!(first, second);
        assert_eq!(
            (first.train.len(), first.val.len(), first.test.len()),
            (5, 2, 3)
        );
        let mut all: Vec<&String> = first
            .train
            .iter()
            .chain(&first.val)
            .chain(&first.test)
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10, "ids must be disjoint and cover the corpus");

        let other_seed = split_corpus(&corpus, (5, 2, 3), 12).unwrap();
        assert_ne!(first, other_seed, "different seeds should differ");
    }

    #[test]
    fn split_count_mismatch_is_refused() {
        let corpus = tiny_corpus();
        let err = split_corpus(&corpus, (2, 2, 2), 1).unwrap_err();
        assert!(err.to_string().contains("split counts"), "{err}");
    }

    #[test]
    fn stats_count_tags_across_records() {
        assert!(corpus_stats(&[]).is_empty());

        let mut corpus = tiny_corpus();
        corpus[1].tags = vec!["granuloma".into(), "spine".into()];
        let stats = corpus_stats(&corpus);
        assert_eq!(
            stats,
            [
                ("granuloma".to_string(), 2),
                ("spine".to_string(), 2),
                ("degenerative".to_string(), 1),
            ]
        );
        let table = stats_table(&stats);
        assert!(table.contains("granuloma"));
        assert!(table.lines().count() == 3);
    }

    #[test]
    fn jsonl_round_trips_derived_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spans.jsonl");
        let examples = vec![
            SpanExample {
                sentence: "Stable cardiomegaly.".into(),
                labels: vec![Heart1],
            },
            SpanExample {
                sentence: "Multiple surgical clips are noted.".into(),
                labels: vec![Extra],
            },
        ];
        save_jsonl(&path, &examples).unwrap();
        let loaded: Vec<SpanExample> = load_jsonl(&path).unwrap();
        assert_eq!(loaded, examples);
    }
}
