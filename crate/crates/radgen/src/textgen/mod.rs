//! Tag-conditioned description generation: tokenizer, sequence decoding,
//! the encoder–decoder model, and the generation entry point.
//!
//! The one behavioural special case lives here: a tag set of exactly
//! `[normal]` never reaches the model — it short-circuits to the fixed
//! sentinel description, which the replacement stage later maps to the
//! verbatim normal template. A decode that produces no tokens also falls
//! back to the sentinel, with a warning, so the pipeline always emits a
//! well-formed description.

mod decode;
mod model;
mod tokenizer;

pub use decode::{beam_search, greedy_decode, sequence_log_prob, DecodeResult, SequenceScorer};
pub use model::{
    load_generator, save_generator, serialize_tags, train_generator, ConditionedScorer,
    GeneratorConfig, GeneratorModel, Vocab, BOS_ID, D_FF, D_MODEL, EOS_ID, PAD_ID, UNK_ID,
};
pub use tokenizer::{detokenize, word_tokenize};

use crate::corpus::{PathologicalDescription, NORMAL_TAG};
use crate::error::Result;
use crate::text::segment_sentences;

/// Generates the pathological description for a tag set: beam search over
/// the conditioned model, detokenized and split into sentences.
///
/// A tag set of exactly `[normal]` returns the sentinel description without
/// touching the model; an empty decode falls back to the sentinel with a
/// warning.
pub fn generate_description(
    model: &GeneratorModel,
    tags: &[String],
) -> Result<PathologicalDescription> {
    generate_description_with(model, tags, model.beam_width(), model.max_len())
}

/// [`generate_description`] with explicit decode settings, overriding the
/// beam width and length cap stored in the checkpoint.
pub fn generate_description_with(
    model: &GeneratorModel,
    tags: &[String],
    beam_width: usize,
    max_len: usize,
) -> Result<PathologicalDescription> {
    generate_with(
        tags,
        || model.scorer(tags),
        model.vocab(),
        beam_width,
        max_len.min(model.max_len()),
    )
}

/// Generation core, generic over how the scorer is conditioned so the
/// normal-tag bypass is testable in isolation: `condition` must not run
/// for the normal tag set.
fn generate_with<'v, S, F>(
    tags: &[String],
    condition: F,
    vocab: &'v Vocab,
    beam_width: usize,
    max_len: usize,
) -> Result<PathologicalDescription>
where
    S: SequenceScorer,
    F: FnOnce() -> Result<S>,
{
    if tags == [NORMAL_TAG] {
        return Ok(PathologicalDescription::normal());
    }
    let scorer = condition()?;
    let result = beam_search(&scorer, beam_width, max_len);
    if result.ids.is_empty() {
        log::warn!("decode for tags {tags:?} produced no tokens; describing as normal");
        return Ok(PathologicalDescription::normal());
    }
    let text = detokenize(&vocab.decode(&result.ids)?);
    Ok(PathologicalDescription::from_sentences(segment_sentences(
        &text,
    )))
}
