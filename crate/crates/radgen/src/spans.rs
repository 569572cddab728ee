//! Span identification: which normal-template sentences a generated
//! sentence supersedes.
//!
//! Each sentence gets 24 independent sigmoid scores — one per template slot
//! plus `extra` — from a bag-of-words model: mean token embedding into a
//! linear head. Scores at or above the threshold become the sentence's
//! label set, ordered by descending score, then normalized so `extra`
//! never co-occurs with slot labels and no sentence ends up unlabeled.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SpanLabel, SpanLabelSet};
use crate::data::SpanExample;
use crate::error::{Error, Result};
use crate::eval;
use crate::nn::{self, config_fingerprint, Adam, ParamSet, Tape, TrainLog};

/// Width of the token embeddings.
pub const EMBED_DIM: usize = 32;

const LABEL_COUNT: usize = SpanLabel::ALL.len();
const UNK: usize = 0;

/// Span-identifier training hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct SpanConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SpanConfig {
    fn default() -> SpanConfig {
        SpanConfig {
            epochs: 15,
            learning_rate: 1e-3,
            threshold: 0.5,
            seed: 0,
        }
    }
}

/// The trained span identifier.
pub struct SpanModel {
    params: ParamSet,
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    threshold: f64,
    config_hash: String,
}

impl std::fmt::Debug for SpanModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpanModel")
            .field("vocab", &self.vocab.len())
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

impl SpanModel {
    fn from_parts(
        params: ParamSet,
        vocab: Vec<String>,
        threshold: f64,
        config_hash: String,
    ) -> SpanModel {
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        SpanModel {
            params,
            vocab,
            index,
            threshold,
            config_hash,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Token ids for a sentence; unknown tokens map to the reserved row,
    /// and a sentence with no tokens at all is the lone unknown.
    fn token_ids(&self, sentence: &str) -> Vec<usize> {
        let ids: Vec<usize> = eval::tokenize(sentence)
            .iter()
            .map(|t| self.index.get(t).copied().unwrap_or(UNK))
            .collect();
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }

    /// The 24 sigmoid scores for a sentence, in canonical label order.
    pub fn score_sentence(&self, sentence: &str) -> Vec<f64> {
        let ids = self.token_ids(sentence);
        let mut tape = Tape::new();
        let vars = self.params.insert_into(&mut tape);
        let logits = forward(self, &mut tape, &vars, &ids);
        let probs = tape.sigmoid(logits);
        tape.value(probs).iter().cloned().collect()
    }
}

/// Network body: token rows → mean embedding → linear head logits (1×24).
fn forward(model: &SpanModel, tape: &mut Tape, vars: &[nn::Var], ids: &[usize]) -> nn::Var {
    let emb = vars[model.params.index_of("emb").expect("emb registered")];
    let w = vars[model.params.index_of("head.w").expect("head.w registered")];
    let b = vars[model.params.index_of("head.b").expect("head.b registered")];
    let rows = tape.rows(emb, ids.to_vec());
    let mean = tape.mean_rows(rows);
    let logits = tape.matmul(mean, w);
    tape.add(logits, b)
}

/// Labels whose score clears the threshold, highest score first (ties in
/// canonical label order), before normalization.
pub fn threshold_spans(scores: &[f64], threshold: f64) -> Vec<(SpanLabel, f64)> {
    let mut picked: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, &s)| (i, s))
        .collect();
    picked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("scores are finite")
            .then(a.0.cmp(&b.0))
    });
    picked
        .into_iter()
        .map(|(i, s)| (SpanLabel::ALL[i], s))
        .collect()
}

/// Scores a sentence and returns its normalized span label set.
pub fn identify_spans(model: &SpanModel, sentence: &str) -> SpanLabelSet {
    identify_spans_with_threshold(model, sentence, model.threshold)
}

/// [`identify_spans`] with an explicit threshold, overriding the one stored
/// in the checkpoint.
pub fn identify_spans_with_threshold(
    model: &SpanModel,
    sentence: &str,
    threshold: f64,
) -> SpanLabelSet {
    let scores = model.score_sentence(sentence);
    let picked = threshold_spans(&scores, threshold);
    let (labels, scores): (Vec<SpanLabel>, Vec<f64>) = picked.into_iter().unzip();
    SpanLabelSet::from_scored(labels, scores)
        .expect("thresholded labels are parallel and duplicate-free")
        .normalized()
}

/// Trains the span identifier with one Adam step per sentence.
pub fn train_spans(
    examples: &[SpanExample],
    config: &SpanConfig,
) -> Result<(SpanModel, TrainLog)> {
    if examples.is_empty() {
        return Err(Error::Dataset("span training corpus is empty".into()));
    }
    if config.learning_rate <= 0.0 {
        return Err(Error::Config("learning rate must be positive".into()));
    }

    for label in SpanLabel::ALL {
        if !examples.iter().any(|e| e.labels.contains(&label)) {
            log::warn!("span label {label} has no positive example; its head stays untrained");
        }
    }

    let mut unique: std::collections::BTreeSet<String> = examples
        .iter()
        .flat_map(|e| eval::tokenize(&e.sentence))
        .collect();
    unique.remove("<unk>");
    let mut vocab = vec!["<unk>".to_string()];
    vocab.extend(unique);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::new();
    params.add("emb", nn::xavier_init(&mut rng, vocab.len(), EMBED_DIM));
    params.add("head.w", nn::xavier_init(&mut rng, EMBED_DIM, LABEL_COUNT));
    params.add("head.b", nn::zeros(1, LABEL_COUNT));

    let mut model = SpanModel::from_parts(
        params,
        vocab,
        config.threshold,
        config_fingerprint(config),
    );

    let encoded: Vec<(Vec<usize>, Array2<f64>)> = examples
        .iter()
        .map(|e| {
            let mut target = Array2::zeros((1, LABEL_COUNT));
            for (i, label) in SpanLabel::ALL.iter().enumerate() {
                if e.labels.contains(label) {
                    target[(0, i)] = 1.0;
                }
            }
            (model.token_ids(&e.sentence), target)
        })
        .collect();

    let mut adam = Adam::new(&model.params);
    let mut train_log = TrainLog::default();
    for _ in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for (ids, target) in &encoded {
            let mut tape = Tape::new();
            let vars = model.params.insert_into(&mut tape);
            let logits = forward(&model, &mut tape, &vars, ids);
            let loss = tape.bce_with_logits(logits, target.clone());
            tape.backward(loss);
            epoch_loss += tape.value(loss)[(0, 0)];
            let grads: Vec<Array2<f64>> = vars.iter().map(|&v| tape.grad(v).clone()).collect();
            adam.step(&mut model.params, &grads, config.learning_rate);
        }
        train_log.epoch_losses.push(epoch_loss / encoded.len() as f64);
        train_log.learning_rates.push(config.learning_rate);
    }
    Ok((model, train_log))
}

/// Micro-averaged precision/recall/F1 over span label membership.
pub fn span_sets_micro_prf(
    predicted: &[SpanLabelSet],
    expected: &[SpanLabelSet],
) -> (f64, f64, f64) {
    let mut tp = 0;
    let mut pred = 0;
    let mut exp = 0;
    for (p, e) in predicted.iter().zip(expected) {
        pred += p.len();
        exp += e.len();
        tp += p.iter().filter(|&l| e.contains(l)).count();
    }
    eval::micro_prf(tp, pred, exp)
}

#[derive(Debug, Serialize, Deserialize)]
struct SpanMetadata {
    kind: String,
    vocab: Vec<String>,
    labels: Vec<String>,
    threshold: f64,
    config_hash: String,
}

/// Persists a checkpoint directory: `metadata.json` + `weights.bin`.
pub fn save_spans(model: &SpanModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let metadata = SpanMetadata {
        kind: "spans".into(),
        vocab: model.vocab.clone(),
        labels: SpanLabel::ALL.iter().map(|l| l.to_string()).collect(),
        threshold: model.threshold,
        config_hash: model.config_hash.clone(),
    };
    std::fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata)?,
    )?;
    nn::save_weights(&dir.join("weights.bin"), &model.params)
}

/// Loads a checkpoint written by [`save_spans`].
pub fn load_spans(dir: impl AsRef<Path>) -> Result<SpanModel> {
    let dir = dir.as_ref();
    let metadata: SpanMetadata =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json"))?)?;
    if metadata.kind != "spans" {
        return Err(Error::Checkpoint(format!(
            "{} holds a {:?} checkpoint, not a span identifier",
            dir.display(),
            metadata.kind
        )));
    }
    let expected_labels: Vec<String> = SpanLabel::ALL.iter().map(|l| l.to_string()).collect();
    if metadata.labels != expected_labels {
        return Err(Error::Checkpoint(
            "checkpoint label ordering does not match this build".into(),
        ));
    }
    if metadata.vocab.first().map(String::as_str) != Some("<unk>") {
        return Err(Error::Checkpoint(
            "span vocabulary must reserve its first row for unknowns".into(),
        ));
    }
    let params = nn::load_weights(&dir.join("weights.bin"))?;
    let expected = [
        ("emb", (metadata.vocab.len(), EMBED_DIM)),
        ("head.w", (EMBED_DIM, LABEL_COUNT)),
        ("head.b", (1, LABEL_COUNT)),
    ];
    for (name, dim) in expected {
        match params.by_name(name) {
            Some(tensor) if tensor.dim() == dim => {}
            Some(tensor) => {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {dim:?}",
                    tensor.dim()
                )))
            }
            None => return Err(Error::Checkpoint(format!("tensor {name} missing"))),
        }
    }
    Ok(SpanModel::from_parts(
        params,
        metadata.vocab,
        metadata.threshold,
        metadata.config_hash,
    ))
}
