//! Template-based chest X-ray report generation.
//!
//! The pipeline turns a frontal chest radiograph into a structured report in
//! four stages:
//!
//! 1. **Tagging** ([`tagger`]) — a small convolutional network scores a fixed
//!    set of abnormality tags; scores above a threshold become the image's
//!    tag set, and an image with no firing tags is tagged `normal`.
//! 2. **Description generation** ([`textgen`]) — a sequence-to-sequence model
//!    conditioned on the tag set emits a short pathological description via
//!    beam search. The `normal` tag set bypasses the model entirely.
//! 3. **Span identification** ([`spans`]) — each generated sentence is
//!    classified against the slots of a fixed normal-report template to
//!    decide which template sentences it supersedes.
//! 4. **Replacement** ([`replace`]) — a deterministic rewriting of the
//!    template: the first slot a sentence covers is replaced, the remaining
//!    covered slots are dropped, and unplaced sentences are appended.
//!
//! Supporting modules provide dataset derivation from report corpora
//! ([`data`]), a synthetic corpus generator for end-to-end testing
//! ([`data::synth`]), text-overlap and clinical-efficacy metrics ([`eval`]),
//! a minimal reverse-mode autodiff engine the models are built on ([`nn`]),
//! and a batch pipeline runner with trace output ([`pipeline`]).
//!
//! Everything is deterministic for a fixed seed: corpus synthesis, dataset
//! splits, weight initialisation, training order, and decoding.

pub mod corpus;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod replace;
pub mod spans;
pub mod tagger;
pub mod text;
pub mod textgen;

pub use corpus::{
    CorpusRecord, NormalTemplate, PathologicalDescription, Report, RuleTable, SpanLabel,
    NORMAL_SENTINEL, NORMAL_TAG,
};
pub use error::{Error, Result};
pub use pipeline::{replay_trace, Pipeline, PipelineConfig, TraceRecord};
pub use replace::build_report;

