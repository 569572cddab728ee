//! Tag-conditioned sequence-to-sequence description generator.
//!
//! A deliberately small encoder–decoder transformer: one encoder layer over
//! the serialized tag sequence, one decoder layer with causal self-attention
//! and cross-attention into the encoder output, single-head attention at
//! model width 32, a 64-wide feed-forward, residual connections throughout,
//! and a linear vocabulary projection. Training is teacher-forced with one
//! Adam step per pair and a per-epoch geometric learning-rate decay.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::PairExample;
use crate::error::{Error, Result};
use crate::nn::{self, config_fingerprint, Adam, ParamSet, Tape, TrainLog, Var};

use super::decode::SequenceScorer;
use super::tokenizer::word_tokenize;

/// Model width of every attention and embedding space.
pub const D_MODEL: usize = 32;
/// Hidden width of the position-wise feed-forward blocks.
pub const D_FF: usize = 64;

/// Reserved vocabulary ids.
pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Closed token vocabulary: four reserved ids, then the training tokens in
/// sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Collects the sorted unique tokens of all texts behind the specials.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut unique: std::collections::BTreeSet<String> = texts
            .into_iter()
            .flat_map(|t| word_tokenize(t))
            .collect();
        for special in SPECIALS {
            unique.remove(special);
        }
        let mut tokens: Vec<String> = SPECIALS.map(String::from).to_vec();
        tokens.extend(unique);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Rebuilds the lookup index from a stored token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.len() < SPECIALS.len()
            || SPECIALS.iter().zip(&tokens).any(|(s, t)| s != t)
        {
            return Err(Error::Checkpoint(
                "vocabulary must start with the four reserved tokens".into(),
            ));
        }
        let index: BTreeMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != tokens.len() {
            return Err(Error::Checkpoint("vocabulary has duplicate tokens".into()));
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Maps tokens to ids, unknown tokens to `<unk>`.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id_of(t).unwrap_or(UNK_ID))
            .collect()
    }

    /// Maps ids back to tokens, refusing any id outside the vocabulary.
    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&id| {
                self.tokens
                    .get(id)
                    .cloned()
                    .ok_or_else(|| {
                        Error::Model(format!(
                            "token id {id} outside vocabulary of {}",
                            self.tokens.len()
                        ))
                    })
            })
            .collect()
    }
}

/// Joins a tag set into the generator's source text, e.g.
/// `"cardiomegaly, nodule"`. Order and duplicates are preserved; an empty
/// tag set is refused.
pub fn serialize_tags(tags: &[String]) -> Result<String> {
    if tags.is_empty() {
        return Err(Error::Model("cannot serialize an empty tag set".into()));
    }
    Ok(tags.join(", "))
}

/// Generator training hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    pub beam_width: usize,
    /// Longest token sequence the model can attend over; longer training
    /// descriptions are truncated with a warning.
    pub max_len: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> GeneratorConfig {
        GeneratorConfig {
            epochs: 20,
            learning_rate: 1e-4,
            lr_decay: 0.8,
            beam_width: 5,
            max_len: 100,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0 < self.lr_decay && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr decay must be in (0, 1]".into()));
        }
        if self.beam_width == 0 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Config("max length must be at least 2".into()));
        }
        Ok(())
    }
}

/// The trained generator: weights, vocabulary, and decode settings.
pub struct GeneratorModel {
    params: ParamSet,
    vocab: Vocab,
    beam_width: usize,
    max_len: usize,
    config_hash: String,
}

impl std::fmt::Debug for GeneratorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorModel")
            .field("vocab", &self.vocab.len())
            .field("beam_width", &self.beam_width)
            .field("max_len", &self.max_len)
            .finish_non_exhaustive()
    }
}

/// Single-head attention with residual: `x + softmax(q·kᵀ/√d)·v·wo`.
fn attention(
    tape: &mut Tape,
    queries_in: Var,
    keys_in: Var,
    wq: Var,
    wk: Var,
    wv: Var,
    wo: Var,
    mask: Option<&Array2<f64>>,
) -> Var {
    let q = tape.matmul(queries_in, wq);
    let k = tape.matmul(keys_in, wk);
    let v = tape.matmul(keys_in, wv);
    let kt = tape.transpose(k);
    let scores = tape.matmul(q, kt);
    let scores = tape.scale(scores, 1.0 / (D_MODEL as f64).sqrt());
    let scores = match mask {
        Some(m) => tape.add_const(scores, m),
        None => scores,
    };
    let weights = tape.softmax_rows(scores);
    let context = tape.matmul(weights, v);
    let projected = tape.matmul(context, wo);
    tape.add(queries_in, projected)
}

/// Position-wise feed-forward with residual: `x + relu(x·w1+b1)·w2+b2`.
fn feed_forward(tape: &mut Tape, x: Var, w1: Var, b1: Var, w2: Var, b2: Var) -> Var {
    let h = tape.matmul(x, w1);
    let h = tape.add_row_broadcast(h, b1);
    let h = tape.relu(h);
    let out = tape.matmul(h, w2);
    let out = tape.add_row_broadcast(out, b2);
    tape.add(x, out)
}

/// Additive causal mask: 0 at or below the diagonal, −1e9 above, so row t
/// of a softmax attends only to positions ≤ t.
fn causal_mask(len: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, len), |(i, j)| if j > i { -1e9 } else { 0.0 })
}

impl GeneratorModel {
    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn beam_width(&self) -> usize {
        self.beam_width
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    fn var(&self, vars: &[Var], name: &str) -> Var {
        vars[self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("parameter {name} is registered"))]
    }

    /// Token + positional embedding rows for a id sequence.
    fn embed(&self, tape: &mut Tape, vars: &[Var], ids: &[usize]) -> Var {
        let tok = tape.rows(self.var(vars, "emb.tok"), ids.to_vec());
        let pos = tape.rows(self.var(vars, "emb.pos"), (0..ids.len()).collect());
        tape.add(tok, pos)
    }

    /// Encodes a source id sequence into the memory the decoder attends to.
    fn encode_on(&self, tape: &mut Tape, vars: &[Var], src_ids: &[usize]) -> Var {
        let x = self.embed(tape, vars, src_ids);
        let x = attention(
            tape,
            x,
            x,
            self.var(vars, "enc.attn.wq"),
            self.var(vars, "enc.attn.wk"),
            self.var(vars, "enc.attn.wv"),
            self.var(vars, "enc.attn.wo"),
            None,
        );
        feed_forward(
            tape,
            x,
            self.var(vars, "enc.ffn.w1"),
            self.var(vars, "enc.ffn.b1"),
            self.var(vars, "enc.ffn.w2"),
            self.var(vars, "enc.ffn.b2"),
        )
    }

    /// Runs the decoder over `dec_ids` (begin token first) against the
    /// encoded memory, returning next-token logits per position.
    fn decode_logits_on(&self, tape: &mut Tape, vars: &[Var], memory: Var, dec_ids: &[usize]) -> Var {
        let mask = causal_mask(dec_ids.len());
        let x = self.embed(tape, vars, dec_ids);
        let x = attention(
            tape,
            x,
            x,
            self.var(vars, "dec.self.wq"),
            self.var(vars, "dec.self.wk"),
            self.var(vars, "dec.self.wv"),
            self.var(vars, "dec.self.wo"),
            Some(&mask),
        );
        let x = attention(
            tape,
            x,
            memory,
            self.var(vars, "dec.cross.wq"),
            self.var(vars, "dec.cross.wk"),
            self.var(vars, "dec.cross.wv"),
            self.var(vars, "dec.cross.wo"),
            None,
        );
        let x = feed_forward(
            tape,
            x,
            self.var(vars, "dec.ffn.w1"),
            self.var(vars, "dec.ffn.b1"),
            self.var(vars, "dec.ffn.w2"),
            self.var(vars, "dec.ffn.b2"),
        );
        let logits = tape.matmul(x, self.var(vars, "out.w"));
        tape.add_row_broadcast(logits, self.var(vars, "out.b"))
    }

    /// Tokenizes and encodes a tag set into source ids, truncated to the
    /// model's attention window.
    fn source_ids(&self, tags: &[String]) -> Result<Vec<usize>> {
        let text = serialize_tags(tags)?;
        let mut ids = self.vocab.encode(&word_tokenize(&text));
        if ids.len() > self.max_len {
            log::warn!("tag sequence of {} tokens truncated to {}", ids.len(), self.max_len);
            ids.truncate(self.max_len);
        }
        Ok(ids)
    }

    /// Conditions the decoder on a tag set, producing a step-wise scorer
    /// for the search routines.
    pub fn scorer(&self, tags: &[String]) -> Result<ConditionedScorer<'_>> {
        let src_ids = self.source_ids(tags)?;
        let mut tape = Tape::new();
        let vars = self.params.insert_into(&mut tape);
        let memory = self.encode_on(&mut tape, &vars, &src_ids);
        Ok(ConditionedScorer {
            model: self,
            memory: tape.value(memory).clone(),
        })
    }
}

/// A [`GeneratorModel`] conditioned on one tag set: the encoder has run,
/// and each step decodes the prefix against the cached memory.
pub struct ConditionedScorer<'a> {
    model: &'a GeneratorModel,
    memory: Array2<f64>,
}

impl SequenceScorer for ConditionedScorer<'_> {
    fn vocab_size(&self) -> usize {
        self.model.vocab.len()
    }

    fn eos_id(&self) -> usize {
        EOS_ID
    }

    fn step_log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let take = prefix.len().min(self.model.max_len - 1);
        let mut dec_ids = Vec::with_capacity(take + 1);
        dec_ids.push(BOS_ID);
        dec_ids.extend(&prefix[prefix.len() - take..]);

        let mut tape = Tape::new();
        let vars = self.model.params.insert_into(&mut tape);
        let memory = tape.leaf(self.memory.clone());
        let logits = self.model.decode_logits_on(&mut tape, &vars, memory, &dec_ids);
        let values = tape.value(logits);
        let last = values.row(values.nrows() - 1);

        let max = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + last.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        last.iter().map(|v| v - lse).collect()
    }
}

/// Trains the generator on tag→description pairs with per-pair Adam steps
/// and a per-epoch learning-rate decay.
pub fn train_generator(
    pairs: &[PairExample],
    config: &GeneratorConfig,
) -> Result<(GeneratorModel, TrainLog)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Dataset("generator training corpus is empty".into()));
    }

    let mut texts: Vec<String> = Vec::new();
    for pair in pairs {
        texts.push(serialize_tags(&pair.tags)?);
        texts.push(pair.description.join(" "));
    }
    let vocab = Vocab::build(texts.iter().map(String::as_str));

    let mut encoded: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(pairs.len());
    for (pair, chunk) in pairs.iter().zip(texts.chunks(2)) {
        let mut src = vocab.encode(&word_tokenize(&chunk[0]));
        if src.len() > config.max_len {
            log::warn!(
                "pair {}: tag sequence of {} tokens truncated to {}",
                pair.id,
                src.len(),
                config.max_len
            );
            src.truncate(config.max_len);
        }
        let mut tgt = vocab.encode(&word_tokenize(&chunk[1]));
        if tgt.is_empty() {
            return Err(Error::Dataset(format!(
                "pair {} has an empty description",
                pair.id
            )));
        }
        if tgt.len() > config.max_len - 1 {
            log::warn!(
                "pair {}: description of {} tokens truncated to {}",
                pair.id,
                tgt.len(),
                config.max_len - 1
            );
            tgt.truncate(config.max_len - 1);
        }
        encoded.push((src, tgt));
    }

    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::new();
    params.add("emb.tok", nn::xavier_init(&mut rng, v, D_MODEL));
    params.add("emb.pos", nn::xavier_init(&mut rng, config.max_len, D_MODEL));
    for block in ["enc.attn", "dec.self", "dec.cross"] {
        for w in ["wq", "wk", "wv", "wo"] {
            params.add(&format!("{block}.{w}"), nn::xavier_init(&mut rng, D_MODEL, D_MODEL));
        }
    }
    for ffn in ["enc.ffn", "dec.ffn"] {
        params.add(&format!("{ffn}.w1"), nn::xavier_init(&mut rng, D_MODEL, D_FF));
        params.add(&format!("{ffn}.b1"), nn::zeros(1, D_FF));
        params.add(&format!("{ffn}.w2"), nn::xavier_init(&mut rng, D_FF, D_MODEL));
        params.add(&format!("{ffn}.b2"), nn::zeros(1, D_MODEL));
    }
    params.add("out.w", nn::xavier_init(&mut rng, D_MODEL, v));
    params.add("out.b", nn::zeros(1, v));

    let mut model = GeneratorModel {
        params,
        vocab,
        beam_width: config.beam_width,
        max_len: config.max_len,
        config_hash: config_fingerprint(config),
    };
    let mut adam = Adam::new(&model.params);
    let mut train_log = TrainLog::default();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate * config.lr_decay.powi(epoch as i32);
        let mut epoch_loss = 0.0;
        for (src, tgt) in &encoded {
            let mut dec_in = Vec::with_capacity(tgt.len() + 1);
            dec_in.push(BOS_ID);
            dec_in.extend(tgt);
            let mut targets = tgt.clone();
            targets.push(EOS_ID);

            let mut tape = Tape::new();
            let vars = model.params.insert_into(&mut tape);
            let memory = model.encode_on(&mut tape, &vars, src);
            let logits = model.decode_logits_on(&mut tape, &vars, memory, &dec_in);
            let loss = tape.ce_with_logits(logits, targets);
            tape.backward(loss);
            epoch_loss += tape.value(loss)[(0, 0)];

            let grads: Vec<Array2<f64>> = vars.iter().map(|&v| tape.grad(v).clone()).collect();
            adam.step(&mut model.params, &grads, lr);
        }
        train_log.epoch_losses.push(epoch_loss / encoded.len() as f64);
        train_log.learning_rates.push(lr);
    }
    Ok((model, train_log))
}

#[derive(Debug, Serialize, Deserialize)]
struct GeneratorMetadata {
    kind: String,
    vocab: Vec<String>,
    beam_width: usize,
    max_len: usize,
    config_hash: String,
}

/// Persists a checkpoint directory: `metadata.json` + `weights.bin`.
pub fn save_generator(model: &GeneratorModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let metadata = GeneratorMetadata {
        kind: "generator".into(),
        vocab: model.vocab.tokens().to_vec(),
        beam_width: model.beam_width,
        max_len: model.max_len,
        config_hash: model.config_hash.clone(),
    };
    std::fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata)?,
    )?;
    nn::save_weights(&dir.join("weights.bin"), &model.params)
}

/// Loads a checkpoint written by [`save_generator`].
pub fn load_generator(dir: impl AsRef<Path>) -> Result<GeneratorModel> {
    let dir = dir.as_ref();
    let metadata: GeneratorMetadata =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json"))?)?;
    if metadata.kind != "generator" {
        return Err(Error::Checkpoint(format!(
            "{} holds a {:?} checkpoint, not a generator",
            dir.display(),
            metadata.kind
        )));
    }
    let vocab = Vocab::from_tokens(metadata.vocab)?;
    if metadata.max_len < 2 {
        return Err(Error::Checkpoint("max length must be at least 2".into()));
    }
    let params = nn::load_weights(&dir.join("weights.bin"))?;
    let v = vocab.len();
    let mut expected: Vec<(String, (usize, usize))> = vec![
        ("emb.tok".into(), (v, D_MODEL)),
        ("emb.pos".into(), (metadata.max_len, D_MODEL)),
    ];
    for block in ["enc.attn", "dec.self", "dec.cross"] {
        for w in ["wq", "wk", "wv", "wo"] {
            expected.push((format!("{block}.{w}"), (D_MODEL, D_MODEL)));
        }
    }
    for ffn in ["enc.ffn", "dec.ffn"] {
        expected.push((format!("{ffn}.w1"), (D_MODEL, D_FF)));
        expected.push((format!("{ffn}.b1"), (1, D_FF)));
        expected.push((format!("{ffn}.w2"), (D_FF, D_MODEL)));
        expected.push((format!("{ffn}.b2"), (1, D_MODEL)));
    }
    expected.push(("out.w".into(), (D_MODEL, v)));
    expected.push(("out.b".into(), (1, v)));
    for (name, dim) in expected {
        match params.by_name(&name) {
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
    Ok(GeneratorModel {
        params,
        vocab,
        beam_width: metadata.beam_width.max(1),
        max_len: metadata.max_len,
        config_hash: metadata.config_hash,
    })
}
