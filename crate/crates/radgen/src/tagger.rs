//! Multilabel image tagging: image → per-label sigmoid scores →
//! thresholded tag set.
//!
//! The desk-scale backbone is a small convolutional encoder: images are
//! resized to 224×224, reduced to a 56×56 luma plane, passed through two
//! strided 3×3 convolutions and a 2×2 mean pool, and read out by a linear
//! sigmoid head — one score per label. An image scoring below the
//! threshold on every label maps to the single tag `"normal"`, which the
//! description generator treats as its sentinel input.

use std::path::Path;
use std::sync::Arc;

use image::imageops::FilterType;
use image::DynamicImage;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TaggerExample;
use crate::error::{Error, Result};
use crate::nn::{self, config_fingerprint, Adam, ParamSet, Tape, TrainLog, Var};

/// Resize target for every input image.
pub const INPUT_SIZE: u32 = 224;

const POOLED: usize = 56; // after 4×4 mean pooling of the 224×224 luma
const C1_OUT: usize = 28; // conv1: 3×3, stride 2, pad 1
const C1_CH: usize = 8;
const C2_OUT: usize = 14; // conv2: 3×3, stride 2, pad 1
const C2_CH: usize = 16;
const P_OUT: usize = 7; // 2×2 mean pool
const FEATURES: usize = P_OUT * P_OUT * C2_CH;

/// Binary target vector with its label names.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    label_names: Vec<String>,
    values: Vec<f64>,
}

impl LabelVector {
    /// Validates that values are binary and parallel to the names.
    pub fn new(label_names: Vec<String>, values: Vec<f64>) -> Result<LabelVector> {
        if label_names.len() != values.len() {
            return Err(Error::Model(format!(
                "{} label names for {} values",
                label_names.len(),
                values.len()
            )));
        }
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Model("label values must be 0 or 1".into()));
        }
        Ok(LabelVector { label_names, values })
    }

    /// Marks each of `label_names` present iff it appears in `tags`.
    pub fn from_tags(label_names: &[String], tags: &[String]) -> LabelVector {
        let values = label_names
            .iter()
            .map(|name| tags.contains(name) as u8 as f64)
            .collect();
        LabelVector {
            label_names: label_names.to_vec(),
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }
}

/// Per-label sigmoid scores, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
}

const CLIP: f64 = 1e-7;

/// Mean binary cross-entropy over all score/target elements, with scores
/// clipped to [1e-7, 1 − 1e-7] so the logarithms stay finite.
pub fn bce_loss(scores: &ScoreVector, targets: &LabelVector) -> Result<f64> {
    if scores.values.len() != targets.values.len() {
        return Err(Error::Model(format!(
            "{} scores for {} targets",
            scores.values.len(),
            targets.values.len()
        )));
    }
    let total: f64 = scores
        .values
        .iter()
        .zip(&targets.values)
        .map(|(&raw, &y)| {
            let p = raw.clamp(CLIP, 1.0 - CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / scores.values.len() as f64)
}

/// Analytic gradient of [`bce_loss`] with respect to each score. Scores in
/// the clipped region (outside [1e-7, 1 − 1e-7]) have zero gradient.
pub fn bce_loss_grad(scores: &ScoreVector, targets: &LabelVector) -> Result<Vec<f64>> {
    if scores.values.len() != targets.values.len() {
        return Err(Error::Model(format!(
            "{} scores for {} targets",
            scores.values.len(),
            targets.values.len()
        )));
    }
    let n = scores.values.len() as f64;
    Ok(scores
        .values
        .iter()
        .zip(&targets.values)
        .map(|(&p, &y)| {
            if !(CLIP..=1.0 - CLIP).contains(&p) {
                0.0
            } else {
                (-y / p + (1.0 - y) / (1.0 - p)) / n
            }
        })
        .collect())
}

/// Builds conv1's gather indices: each output position row collects its
/// 3×3 window over the 56×56 input plane; −1 marks zero padding.
fn conv1_indices() -> Vec<i64> {
    let mut idx = Vec::with_capacity(C1_OUT * C1_OUT * 9);
    for oi in 0..C1_OUT as i64 {
        for oj in 0..C1_OUT as i64 {
            for ki in -1..=1 {
                for kj in -1..=1 {
                    let ii = 2 * oi + ki;
                    let jj = 2 * oj + kj;
                    let bound = POOLED as i64;
                    idx.push(if (0..bound).contains(&ii) && (0..bound).contains(&jj) {
                        ii * bound + jj
                    } else {
                        -1
                    });
                }
            }
        }
    }
    idx
}

/// Builds conv2's gather indices over the position-major 28×28×8 feature
/// map (a 784×8 matrix): 3×3 window × 8 channels per output position.
fn conv2_indices() -> Vec<i64> {
    let mut idx = Vec::with_capacity(C2_OUT * C2_OUT * 9 * C1_CH);
    for oi in 0..C2_OUT as i64 {
        for oj in 0..C2_OUT as i64 {
            for ki in -1..=1 {
                for kj in -1..=1 {
                    let ii = 2 * oi + ki;
                    let jj = 2 * oj + kj;
                    let bound = C1_OUT as i64;
                    for ch in 0..C1_CH as i64 {
                        idx.push(
                            if (0..bound).contains(&ii) && (0..bound).contains(&jj) {
                                (ii * bound + jj) * C1_CH as i64 + ch
                            } else {
                                -1
                            },
                        );
                    }
                }
            }
        }
    }
    idx
}

/// Builds the 2×2 mean-pool gather: one row of 4 values per (position,
/// channel) of the 7×7×16 output, over the 196×16 conv2 map.
fn pool_indices() -> Vec<i64> {
    let mut idx = Vec::with_capacity(P_OUT * P_OUT * C2_CH * 4);
    for oi in 0..P_OUT as i64 {
        for oj in 0..P_OUT as i64 {
            for ch in 0..C2_CH as i64 {
                for di in 0..2 {
                    for dj in 0..2 {
                        let ii = 2 * oi + di;
                        let jj = 2 * oj + dj;
                        idx.push((ii * C2_OUT as i64 + jj) * C2_CH as i64 + ch);
                    }
                }
            }
        }
    }
    idx
}

/// The trained tagger: convolutional weights, label vocabulary, and the
/// decision threshold.
pub struct TaggerModel {
    params: ParamSet,
    label_names: Vec<String>,
    threshold: f64,
    config_hash: String,
    idx1: Arc<Vec<i64>>,
    idx2: Arc<Vec<i64>>,
    idxp: Arc<Vec<i64>>,
}

impl std::fmt::Debug for TaggerModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaggerModel")
            .field("labels", &self.label_names)
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

/// Tagger training hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct TaggerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Explicit label vocabulary; `None` derives the sorted set of tags
    /// present in the training data.
    pub labels: Option<Vec<String>>,
}

impl Default for TaggerConfig {
    fn default() -> TaggerConfig {
        TaggerConfig {
            epochs: 20,
            learning_rate: 1e-4,
            threshold: 0.5,
            seed: 0,
            labels: None,
        }
    }
}

/// Decodes and reduces an image to the 56×56 normalized luma plane the
/// network consumes.
pub fn preprocess_image(image: &DynamicImage) -> Array2<f64> {
    let resized = image
        .resize_exact(INPUT_SIZE, INPUT_SIZE, FilterType::Triangle)
        .to_luma8();
    let mut out = Array2::zeros((POOLED, POOLED));
    for i in 0..POOLED {
        for j in 0..POOLED {
            let mut sum = 0f64;
            for di in 0..4 {
                for dj in 0..4 {
                    sum += resized.get_pixel((j * 4 + dj) as u32, (i * 4 + di) as u32).0[0]
                        as f64;
                }
            }
            out[(i, j)] = sum / 16.0 / 255.0 - 0.5;
        }
    }
    out
}

impl TaggerModel {
    fn with_params(
        params: ParamSet,
        label_names: Vec<String>,
        threshold: f64,
        config_hash: String,
    ) -> TaggerModel {
        TaggerModel {
            params,
            label_names,
            threshold,
            config_hash,
            idx1: Arc::new(conv1_indices()),
            idx2: Arc::new(conv2_indices()),
            idxp: Arc::new(pool_indices()),
        }
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Runs the network on a tape: preprocessed input → logits (1×L).
    /// `params` must be this model's parameters inserted in order.
    fn forward(&self, tape: &mut Tape, input: Var, params: &[Var]) -> Var {
        let [w1, b1, w2, b2, w3, b3] = params else {
            panic!("tagger expects 6 parameters, got {}", params.len())
        };
        let g1 = tape.gather_flat(input, self.idx1.clone(), 9);
        let h1 = tape.matmul(g1, *w1);
        let h1 = tape.add_row_broadcast(h1, *b1);
        let h1 = tape.relu(h1);

        let g2 = tape.gather_flat(h1, self.idx2.clone(), 9 * C1_CH);
        let h2 = tape.matmul(g2, *w2);
        let h2 = tape.add_row_broadcast(h2, *b2);
        let h2 = tape.relu(h2);

        let windows = tape.gather_flat(h2, self.idxp.clone(), 4);
        let quarter = tape.leaf(Array2::from_elem((4, 1), 0.25));
        let pooled = tape.matmul(windows, quarter);
        let flat = tape.reshape(pooled, 1, FEATURES);

        let logits = tape.matmul(flat, *w3);
        tape.add(logits, *b3)
    }

    /// Scores a preprocessed 56×56 input plane.
    pub fn score_plane(&self, plane: &Array2<f64>) -> ScoreVector {
        let mut tape = Tape::new();
        let input = tape.leaf(plane.clone());
        let params = self.params.insert_into(&mut tape);
        let logits = self.forward(&mut tape, input, &params);
        let probs = tape.sigmoid(logits);
        ScoreVector {
            values: tape.value(probs).iter().cloned().collect(),
        }
    }

    /// Scores a decoded image.
    pub fn score_image(&self, image: &DynamicImage) -> ScoreVector {
        self.score_plane(&preprocess_image(image))
    }
}

/// Labels scoring at or above the threshold, in label order; an empty
/// result maps to the single tag `"normal"`.
pub fn threshold_tags(label_names: &[String], scores: &ScoreVector, threshold: f64) -> Vec<String> {
    let tags: Vec<String> = label_names
        .iter()
        .zip(&scores.values)
        .filter(|(_, &s)| s >= threshold)
        .map(|(name, _)| name.clone())
        .collect();
    if tags.is_empty() {
        vec![crate::corpus::NORMAL_TAG.to_string()]
    } else {
        tags
    }
}

/// Scores an image file and thresholds the result into a tag set.
pub fn tag_image(model: &TaggerModel, path: impl AsRef<Path>) -> Result<(ScoreVector, Vec<String>)> {
    let image = image::open(path.as_ref())?;
    let scores = model.score_image(&image);
    let tags = threshold_tags(&model.label_names, &scores, model.threshold);
    Ok((scores, tags))
}

/// Trains the tagger with full-batch Adam: every epoch accumulates the
/// mean gradient over all examples and applies one update, so the logged
/// per-epoch loss decreases essentially monotonically.
pub fn train_tagger(
    examples: &[TaggerExample],
    config: &TaggerConfig,
) -> Result<(TaggerModel, TrainLog)> {
    if examples.is_empty() {
        return Err(Error::Dataset("tagger training corpus is empty".into()));
    }

    let mut planes: Vec<(Array2<f64>, &TaggerExample)> = Vec::new();
    for example in examples {
        match image::open(&example.image) {
            Ok(img) => planes.push((preprocess_image(&img), example)),
            Err(e) => log::warn!("skipping {}: {e}", example.image),
        }
    }
    if planes.is_empty() {
        return Err(Error::Dataset(
            "no tagger training image could be decoded".into(),
        ));
    }

    let candidate_labels: Vec<String> = match &config.labels {
        Some(labels) => labels.clone(),
        None => {
            let set: std::collections::BTreeSet<String> = planes
                .iter()
                .flat_map(|(_, e)| e.tags.iter().cloned())
                .collect();
            set.into_iter().collect()
        }
    };
    let label_names: Vec<String> = candidate_labels
        .into_iter()
        .filter(|label| {
            let present = planes.iter().any(|(_, e)| e.tags.contains(label));
            if !present {
                log::warn!("label {label:?} has no positive example; dropped");
            }
            present
        })
        .collect();
    if label_names.is_empty() {
        return Err(Error::Dataset(
            "no label has a positive training example".into(),
        ));
    }

    let targets: Vec<Array2<f64>> = planes
        .iter()
        .map(|(_, e)| {
            let v = LabelVector::from_tags(&label_names, &e.tags);
            Array2::from_shape_vec((1, label_names.len()), v.values).unwrap()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::new();
    params.add("conv1.w", nn::xavier_init(&mut rng, 9, C1_CH));
    params.add("conv1.b", nn::zeros(1, C1_CH));
    params.add("conv2.w", nn::xavier_init(&mut rng, 9 * C1_CH, C2_CH));
    params.add("conv2.b", nn::zeros(1, C2_CH));
    params.add("fc.w", nn::xavier_init(&mut rng, FEATURES, label_names.len()));
    params.add("fc.b", nn::zeros(1, label_names.len()));

    let mut model = TaggerModel::with_params(
        params,
        label_names,
        config.threshold,
        config_fingerprint(config),
    );
    let mut adam = Adam::new(&model.params);
    let mut train_log = TrainLog::default();
    let n = planes.len() as f64;

    for _ in 0..config.epochs {
        let mut grads: Vec<Array2<f64>> = model
            .params
            .entries()
            .map(|(_, v)| Array2::zeros(v.dim()))
            .collect();
        let mut epoch_loss = 0.0;
        for ((plane, _), target) in planes.iter().zip(&targets) {
            let mut tape = Tape::new();
            let input = tape.leaf(plane.clone());
            let vars = model.params.insert_into(&mut tape);
            let logits = model.forward(&mut tape, input, &vars);
            let loss = tape.bce_with_logits(logits, target.clone());
            tape.backward(loss);
            epoch_loss += tape.value(loss)[(0, 0)];
            for (grad, var) in grads.iter_mut().zip(&vars) {
                *grad += tape.grad(*var);
            }
        }
        for grad in &mut grads {
            *grad /= n;
        }
        adam.step(&mut model.params, &grads, config.learning_rate);
        train_log.epoch_losses.push(epoch_loss / n);
        train_log.learning_rates.push(config.learning_rate);
    }
    Ok((model, train_log))
}

#[derive(Debug, Serialize, Deserialize)]
struct TaggerMetadata {
    kind: String,
    label_names: Vec<String>,
    threshold: f64,
    input_size: u32,
    config_hash: String,
}

/// Persists a checkpoint directory: `metadata.json` + `weights.bin`.
pub fn save_tagger(model: &TaggerModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let metadata = TaggerMetadata {
        kind: "tagger".into(),
        label_names: model.label_names.clone(),
        threshold: model.threshold,
        input_size: INPUT_SIZE,
        config_hash: model.config_hash.clone(),
    };
    std::fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata)?,
    )?;
    nn::save_weights(&dir.join("weights.bin"), &model.params)
}

/// Loads a checkpoint written by [`save_tagger`].
pub fn load_tagger(dir: impl AsRef<Path>) -> Result<TaggerModel> {
    let dir = dir.as_ref();
    let metadata: TaggerMetadata =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json"))?)?;
    if metadata.kind != "tagger" {
        return Err(Error::Checkpoint(format!(
            "{} holds a {:?} checkpoint, not a tagger",
            dir.display(),
            metadata.kind
        )));
    }
    let params = nn::load_weights(&dir.join("weights.bin"))?;
    let expected = [
        ("conv1.w", (9, C1_CH)),
        ("conv1.b", (1, C1_CH)),
        ("conv2.w", (9 * C1_CH, C2_CH)),
        ("conv2.b", (1, C2_CH)),
        ("fc.w", (FEATURES, metadata.label_names.len())),
        ("fc.b", (1, metadata.label_names.len())),
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
            None => {
                return Err(Error::Checkpoint(format!("tensor {name} missing")));
            }
        }
    }
    Ok(TaggerModel::with_params(
        params,
        metadata.label_names,
        metadata.threshold,
        metadata.config_hash,
    ))
}

/// Micro-averaged precision/recall/F1 between predicted and expected tag
/// sets, counting per-label decisions.
pub fn tag_sets_micro_prf(
    predicted: &[Vec<String>],
    expected: &[Vec<String>],
) -> (f64, f64, f64) {
    let mut tp = 0;
    let mut pred = 0;
    let mut exp = 0;
    for (p, e) in predicted.iter().zip(expected) {
        pred += p.len();
        exp += e.len();
        tp += p.iter().filter(|t| e.contains(t)).count();
    }
    crate::eval::micro_prf(tp, pred, exp)
}
