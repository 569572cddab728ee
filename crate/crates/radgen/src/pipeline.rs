//! End-to-end report generation: load the three trained stages, run
//! image → tags → description → spans → report, and record a replayable
//! trace for every study.
//!
//! Inference is fully deterministic — no sampling anywhere — so rerunning a
//! pipeline over the same inputs produces byte-identical traces. Batch runs
//! parallelize across images with per-image failure isolation: one
//! undecodable file yields one error entry, never a poisoned batch.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{NormalTemplate, PathologicalDescription, SpanLabel, SpanLabelSet};
use crate::error::{Error, Result};
use crate::nn::config_fingerprint;
use crate::replace::build_report;
use crate::spans::{identify_spans_with_threshold, load_spans, SpanConfig, SpanModel};
use crate::tagger::{load_tagger, threshold_tags, TaggerConfig, TaggerModel};
use crate::textgen::{generate_description_with, load_generator, GeneratorConfig, GeneratorModel};

/// Every knob in one flat file: artifact paths, inference overrides, and
/// the training hyperparameters of all three stages. Unset inference
/// overrides defer to the values stored in each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Normal-report template file; unset means the built-in template.
    pub template: Option<PathBuf>,
    /// Concept-annotation rule file; unset means the built-in table.
    pub rules: Option<PathBuf>,
    pub tagger_checkpoint: PathBuf,
    pub generator_checkpoint: PathBuf,
    pub spans_checkpoint: PathBuf,
    /// Tag decision threshold override.
    pub tag_threshold: Option<f64>,
    /// Span decision threshold override.
    pub span_threshold: Option<f64>,
    pub beam_width: Option<usize>,
    pub max_len: Option<usize>,
    pub tagger_epochs: usize,
    pub tagger_lr: f64,
    pub generator_epochs: usize,
    pub generator_lr: f64,
    /// Generator learning-rate decay per epoch.
    pub lr_decay: f64,
    pub spans_epochs: usize,
    pub spans_lr: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            template: None,
            rules: None,
            tagger_checkpoint: PathBuf::from("checkpoints/tagger"),
            generator_checkpoint: PathBuf::from("checkpoints/generator"),
            spans_checkpoint: PathBuf::from("checkpoints/spans"),
            tag_threshold: None,
            span_threshold: None,
            beam_width: None,
            max_len: None,
            tagger_epochs: 20,
            tagger_lr: 1e-4,
            generator_epochs: 20,
            generator_lr: 1e-4,
            lr_decay: 0.8,
            spans_epochs: 15,
            spans_lr: 1e-3,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Parses a flat key-value configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&source)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fingerprint of the full configuration, for provenance in logs.
    pub fn fingerprint(&self) -> String {
        config_fingerprint(self)
    }

    /// Tagger training settings drawn from this configuration.
    pub fn tagger_config(&self) -> TaggerConfig {
        TaggerConfig {
            epochs: self.tagger_epochs,
            learning_rate: self.tagger_lr,
            threshold: self.tag_threshold.unwrap_or(0.5),
            seed: self.seed,
            labels: None,
        }
    }

    /// Generator training settings drawn from this configuration.
    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            epochs: self.generator_epochs,
            learning_rate: self.generator_lr,
            lr_decay: self.lr_decay,
            beam_width: self.beam_width.unwrap_or(5),
            max_len: self.max_len.unwrap_or(100),
            seed: self.seed,
        }
    }

    /// Span-identifier training settings drawn from this configuration.
    pub fn spans_config(&self) -> SpanConfig {
        SpanConfig {
            epochs: self.spans_epochs,
            learning_rate: self.spans_lr,
            threshold: self.span_threshold.unwrap_or(0.5),
            seed: self.seed,
        }
    }

    /// Loads the configured template, or the built-in one.
    pub fn load_template(&self) -> Result<NormalTemplate> {
        match &self.template {
            Some(path) => NormalTemplate::load(path),
            None => Ok(NormalTemplate::default_template()),
        }
    }

    /// Loads the configured rule table, or the built-in one.
    pub fn load_rules(&self) -> Result<crate::corpus::RuleTable> {
        match &self.rules {
            Some(path) => crate::corpus::RuleTable::load(path),
            None => Ok(crate::corpus::RuleTable::default_rules()),
        }
    }
}

/// One study's complete, replayable pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    /// Thresholded tag set (never empty; `["normal"]` when nothing fires).
    pub tags: Vec<String>,
    /// Raw per-label tagger scores, empty when generation started from a
    /// tag set rather than an image.
    pub scores: Vec<f64>,
    /// Generated description sentences.
    pub description: Vec<String>,
    /// Normalized span labels per description sentence, in the order the
    /// replacement engine consumed them. Empty for a normal description.
    pub spans: Vec<Vec<SpanLabel>>,
    /// The rendered report.
    pub report: String,
}

/// Re-runs the deterministic replacement stage from a trace's recorded
/// description and spans. The result must equal the recorded report; a
/// mismatch means the trace was edited or produced by a different template.
pub fn replay_trace(template: &NormalTemplate, record: &TraceRecord) -> Result<String> {
    let description = PathologicalDescription::from_sentences(record.description.clone());
    let spans: Vec<SpanLabelSet> = record
        .spans
        .iter()
        .map(|labels| SpanLabelSet::from_labels(labels.iter().copied()).normalized())
        .collect();
    let spans = if description.is_normal { Vec::new() } else { spans };
    Ok(build_report(template, &description, &spans)?.render())
}

/// The loaded four-stage pipeline.
pub struct Pipeline {
    template: NormalTemplate,
    tagger: TaggerModel,
    generator: GeneratorModel,
    spans: SpanModel,
    tag_threshold: f64,
    span_threshold: f64,
    beam_width: usize,
    max_len: usize,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("tag_threshold", &self.tag_threshold)
            .field("span_threshold", &self.span_threshold)
            .field("beam_width", &self.beam_width)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    /// Loads the template and all three stage checkpoints. A missing or
    /// invalid artifact fails with the stage named.
    pub fn load(config: &PipelineConfig) -> Result<Pipeline> {
        let template = config.load_template()?;
        let tagger = load_tagger(&config.tagger_checkpoint)
            .map_err(|e| Error::Checkpoint(format!("tagger stage: {e}")))?;
        let generator = load_generator(&config.generator_checkpoint)
            .map_err(|e| Error::Checkpoint(format!("generator stage: {e}")))?;
        let spans = load_spans(&config.spans_checkpoint)
            .map_err(|e| Error::Checkpoint(format!("span stage: {e}")))?;
        Ok(Pipeline {
            tag_threshold: config.tag_threshold.unwrap_or_else(|| tagger.threshold()),
            span_threshold: config.span_threshold.unwrap_or_else(|| spans.threshold()),
            beam_width: config.beam_width.unwrap_or_else(|| generator.beam_width()),
            max_len: config.max_len.unwrap_or_else(|| generator.max_len()),
            template,
            tagger,
            generator,
            spans,
        })
    }

    pub fn template(&self) -> &NormalTemplate {
        &self.template
    }

    pub fn tagger(&self) -> &TaggerModel {
        &self.tagger
    }

    pub fn generator(&self) -> &GeneratorModel {
        &self.generator
    }

    pub fn span_model(&self) -> &SpanModel {
        &self.spans
    }

    /// Runs stages two through four from an explicit tag set.
    pub fn run_tags(&self, id: &str, tags: &[String], scores: Vec<f64>) -> Result<TraceRecord> {
        let description =
            generate_description_with(&self.generator, tags, self.beam_width, self.max_len)?;
        let span_sets: Vec<SpanLabelSet> = if description.is_normal {
            Vec::new()
        } else {
            description
                .sentences
                .iter()
                .map(|s| identify_spans_with_threshold(&self.spans, s, self.span_threshold))
                .collect()
        };
        let report = build_report(&self.template, &description, &span_sets)?.render();
        Ok(TraceRecord {
            id: id.to_string(),
            tags: tags.to_vec(),
            scores,
            description: description.sentences,
            spans: span_sets
                .iter()
                .map(|s| s.labels().to_vec())
                .collect(),
            report,
        })
    }

    /// Runs all four stages on one image file.
    pub fn run_image(&self, path: impl AsRef<Path>) -> Result<TraceRecord> {
        let path = path.as_ref();
        let image = image::open(path)?;
        let scores = self.tagger.score_image(&image);
        let tags = threshold_tags(self.tagger.label_names(), &scores, self.tag_threshold);
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.run_tags(&id, &tags, scores.values)
    }

    /// Runs a batch of images in parallel. Output order matches input
    /// order, and each image fails independently.
    pub fn run_batch(&self, paths: &[PathBuf]) -> Vec<Result<TraceRecord>> {
        paths.par_iter().map(|p| self.run_image(p)).collect()
    }
}
