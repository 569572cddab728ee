//! Command-line front end: every subcommand is a thin wrapper over one
//! library operation, so anything scriptable here is equally available as
//! an API call.
//!
//! All subcommands accept `--config <file>` (a flat TOML file, see
//! [`PipelineConfig`]) plus typed flag overrides; flags win over file
//! values. Success exits 0; any refusal prints one diagnostic line to
//! standard error and exits nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radgen::corpus::{load_corpus, save_corpus, PathologicalDescription, SpanLabel, SpanLabelSet};
use radgen::data::{
    annotate_span_labels, corpus_stats, derive_datasets, load_jsonl, save_jsonl, stats_table,
    synthesize_corpus, PairExample, PolarityConfig, SpanExample, SynthSpec, TaggerExample,
};
use radgen::error::{Error, Result};
use radgen::eval::{evaluate_corpus, ImportedLabels, RuleLabeler};
use radgen::spans::{save_spans, train_spans};
use radgen::tagger::{save_tagger, train_tagger};
use radgen::textgen::{generate_description_with, load_generator, save_generator, train_generator};
use radgen::{build_report, replay_trace, Pipeline, PipelineConfig, TraceRecord};

#[derive(Parser)]
#[command(name = "radgen", version, about = "Template-based chest X-ray report generation")]
struct Cli {
    /// Configuration file (flat TOML); flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus of reports (and optionally images).
    SynthCorpus {
        /// Output corpus file, one JSON record per line.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
        /// Directory for the synthetic images; omit to skip image files.
        #[arg(long, value_name = "DIR")]
        images: Option<PathBuf>,
        /// Number of records.
        #[arg(long)]
        size: Option<usize>,
        /// Square image edge length in pixels.
        #[arg(long)]
        image_size: Option<u32>,
        /// Seed override (defaults to the configured seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Derive the three training datasets from an annotated corpus.
    DeriveData {
        /// Input corpus file, one JSON record per line.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        /// Directory for tagger.jsonl, pairs.jsonl, and spans.jsonl.
        #[arg(long, value_name = "DIR", default_value = "derived")]
        output_dir: PathBuf,
        /// Sentence-polarity classifier epochs.
        #[arg(long)]
        polarity_epochs: Option<usize>,
        /// Sentence-polarity classifier learning rate.
        #[arg(long)]
        polarity_lr: Option<f64>,
    },
    /// Print the per-tag frequency table of a corpus.
    Stats {
        /// Input corpus file, one JSON record per line.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
    },
    /// Train the image tagger and write its checkpoint.
    TrainTagger {
        /// Tagger dataset (JSON lines of image/tags examples).
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Checkpoint directory (defaults to the configured path).
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Tag decision threshold stored with the checkpoint.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the tag-conditioned description generator.
    TrainGenerator {
        /// Pair dataset (JSON lines of tags/description examples).
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Checkpoint directory (defaults to the configured path).
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Learning-rate decay per epoch.
        #[arg(long)]
        lr_decay: Option<f64>,
        #[arg(long)]
        beam_width: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the sentence span identifier.
    TrainSpans {
        /// Span dataset (JSON lines of sentence/labels examples).
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Checkpoint directory (defaults to the configured path).
        #[arg(long, value_name = "DIR")]
        output: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Span decision threshold stored with the checkpoint.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate reports from images, or a description from a tag set.
    Generate {
        /// Image files to run through the full pipeline (repeatable).
        #[arg(long = "image", value_name = "FILE")]
        images: Vec<PathBuf>,
        /// Comma-separated tag set: print the generated description
        /// instead of running the image stages.
        #[arg(long, value_name = "TAGS", conflicts_with = "images")]
        tags: Option<String>,
        /// File for the trace records (JSON lines), image mode only.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        #[arg(long)]
        beam_width: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Run the template replacement engine, or replay recorded traces.
    Replace {
        /// Trace file (JSON lines) to replay through the engine.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["description", "labels"])]
        trace: Option<PathBuf>,
        /// Description file, one sentence per line.
        #[arg(long, value_name = "FILE")]
        description: Option<PathBuf>,
        /// Span-label file aligned with the description: one
        /// comma-separated label list per line. Omit to annotate each
        /// sentence with the rule table.
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
    },
    /// Score candidate reports against line-aligned references.
    Evaluate {
        /// Candidate reports, one per line.
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Reference reports, one per line, aligned with the candidates.
        #[arg(long, value_name = "FILE")]
        references: PathBuf,
        /// Pre-computed concept labels for the clinical-efficacy scores
        /// (JSON with "candidates" and "references" lists); omit to
        /// extract concepts with the rule table.
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::SynthCorpus { output, images, size, image_size, seed } => {
            let mut spec = SynthSpec { seed: seed.unwrap_or(config.seed), ..SynthSpec::default() };
            if let Some(n) = size {
                spec.size = n;
            }
            if let Some(px) = image_size {
                spec.image_size = px;
            }
            let records = synthesize_corpus(&spec, images.as_deref())?;
            save_corpus(&output, &records)?;
            println!("wrote {} records to {}", records.len(), output.display());
            Ok(())
        }
        Command::DeriveData { corpus, output_dir, polarity_epochs, polarity_lr } => {
            let records = load_corpus(&corpus)?;
            let rules = config.load_rules()?;
            let mut polarity = PolarityConfig::default();
            if let Some(n) = polarity_epochs {
                polarity.epochs = n;
            }
            if let Some(lr) = polarity_lr {
                polarity.learning_rate = lr;
            }
            let datasets = derive_datasets(&records, &rules, &polarity)?;
            std::fs::create_dir_all(&output_dir)?;
            save_jsonl(output_dir.join("tagger.jsonl"), &datasets.tagger)?;
            save_jsonl(output_dir.join("pairs.jsonl"), &datasets.pairs)?;
            save_jsonl(output_dir.join("spans.jsonl"), &datasets.spans)?;
            println!(
                "wrote {} tagger, {} pair, and {} span examples to {}",
                datasets.tagger.len(),
                datasets.pairs.len(),
                datasets.spans.len(),
                output_dir.display()
            );
            Ok(())
        }
        Command::Stats { corpus } => {
            let records = load_corpus(&corpus)?;
            print!("{}", stats_table(&corpus_stats(&records)));
            Ok(())
        }
        Command::TrainTagger { data, output, epochs, learning_rate, threshold, seed } => {
            let examples: Vec<TaggerExample> = load_jsonl(&data)?;
            let mut tc = config.tagger_config();
            if let Some(n) = epochs {
                tc.epochs = n;
            }
            if let Some(lr) = learning_rate {
                tc.learning_rate = lr;
            }
            if let Some(t) = threshold {
                tc.threshold = t;
            }
            if let Some(s) = seed {
                tc.seed = s;
            }
            let (model, log) = train_tagger(&examples, &tc)?;
            let out = output.unwrap_or_else(|| config.tagger_checkpoint.clone());
            save_tagger(&model, &out)?;
            report_training(&log.epoch_losses, &out);
            Ok(())
        }
        Command::TrainGenerator {
            data,
            output,
            epochs,
            learning_rate,
            lr_decay,
            beam_width,
            max_len,
            seed,
        } => {
            let pairs: Vec<PairExample> = load_jsonl(&data)?;
            let mut gc = config.generator_config();
            if let Some(n) = epochs {
                gc.epochs = n;
            }
            if let Some(lr) = learning_rate {
                gc.learning_rate = lr;
            }
            if let Some(d) = lr_decay {
                gc.lr_decay = d;
            }
            if let Some(w) = beam_width {
                gc.beam_width = w;
            }
            if let Some(l) = max_len {
                gc.max_len = l;
            }
            if let Some(s) = seed {
                gc.seed = s;
            }
            let (model, log) = train_generator(&pairs, &gc)?;
            let out = output.unwrap_or_else(|| config.generator_checkpoint.clone());
            save_generator(&model, &out)?;
            report_training(&log.epoch_losses, &out);
            Ok(())
        }
        Command::TrainSpans { data, output, epochs, learning_rate, threshold, seed } => {
            let examples: Vec<SpanExample> = load_jsonl(&data)?;
            let mut sc = config.spans_config();
            if let Some(n) = epochs {
                sc.epochs = n;
            }
            if let Some(lr) = learning_rate {
                sc.learning_rate = lr;
            }
            if let Some(t) = threshold {
                sc.threshold = t;
            }
            if let Some(s) = seed {
                sc.seed = s;
            }
            let (model, log) = train_spans(&examples, &sc)?;
            let out = output.unwrap_or_else(|| config.spans_checkpoint.clone());
            save_spans(&model, &out)?;
            report_training(&log.epoch_losses, &out);
            Ok(())
        }
        Command::Generate { images, tags, trace, beam_width, max_len } => {
            let mut config = config;
            if beam_width.is_some() {
                config.beam_width = beam_width;
            }
            if max_len.is_some() {
                config.max_len = max_len;
            }
            match tags {
                Some(raw) => generate_from_tags(&config, &raw),
                None if images.is_empty() => {
                    Err(Error::Config("generate needs --image or --tags".into()))
                }
                None => generate_from_images(&config, &images, trace.as_deref()),
            }
        }
        Command::Replace { trace, description, labels } => {
            let template = config.load_template()?;
            match (trace, description) {
                (Some(path), _) => {
                    let records: Vec<TraceRecord> = load_jsonl(&path)?;
                    for record in &records {
                        let report = replay_trace(&template, record)?;
                        if report != record.report {
                            return Err(Error::Replacement(format!(
                                "trace {:?} does not replay to its recorded report",
                                record.id
                            )));
                        }
                        println!("{report}");
                    }
                    Ok(())
                }
                (None, Some(path)) => {
                    let sentences: Vec<String> = std::fs::read_to_string(&path)?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(String::from)
                        .collect();
                    let description = PathologicalDescription::from_sentences(sentences);
                    let span_sets = if description.is_normal {
                        Vec::new()
                    } else {
                        match labels {
                            Some(path) => parse_label_file(&path, description.sentences.len())?,
                            None => {
                                let rules = config.load_rules()?;
                                description
                                    .sentences
                                    .iter()
                                    .map(|s| annotate_span_labels(s, &rules))
                                    .collect()
                            }
                        }
                    };
                    println!("{}", build_report(&template, &description, &span_sets)?.render());
                    Ok(())
                }
                (None, None) => Err(Error::Config("replace needs --trace or --description".into())),
            }
        }
        Command::Evaluate { candidates, references, labels } => {
            let cands = read_lines(&candidates)?;
            let refs = read_lines(&references)?;
            let report = match labels {
                Some(path) => {
                    let imported = ImportedLabels::from_json(&std::fs::read_to_string(&path)?)?;
                    evaluate_corpus(&cands, &refs, &imported)?
                }
                None => {
                    let rules = config.load_rules()?;
                    evaluate_corpus(&cands, &refs, &RuleLabeler(&rules))?
                }
            };
            println!("{}", serde_json::to_string(&report)?);
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

/// Description-only generation: tags in, sentences out, one per line.
fn generate_from_tags(config: &PipelineConfig, raw: &str) -> Result<()> {
    let tags: Vec<String> =
        raw.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
    if tags.is_empty() {
        return Err(Error::Config("--tags names no tags".into()));
    }
    let model = load_generator(&config.generator_checkpoint)
        .map_err(|e| Error::Checkpoint(format!("generator stage: {e}")))?;
    let beam_width = config.beam_width.unwrap_or_else(|| model.beam_width());
    let max_len = config.max_len.unwrap_or_else(|| model.max_len());
    let description = generate_description_with(&model, &tags, beam_width, max_len)?;
    for sentence in &description.sentences {
        println!("{sentence}");
    }
    Ok(())
}

/// Full pipeline over a batch of images: one report line per image on
/// standard output, per-image failures on standard error, and optionally
/// every trace record as JSON lines.
fn generate_from_images(config: &PipelineConfig, images: &[PathBuf], trace: Option<&Path>) -> Result<()> {
    let pipeline = Pipeline::load(config)?;
    let results = pipeline.run_batch(images);
    let mut records = Vec::new();
    let mut failures = 0usize;
    for (path, result) in images.iter().zip(results) {
        match result {
            Ok(record) => {
                println!("{}", record.report);
                records.push(record);
            }
            Err(e) => {
                failures += 1;
                eprintln!("error: {}: {e}", path.display());
            }
        }
    }
    if let Some(path) = trace {
        save_jsonl(path, &records)?;
    }
    if failures > 0 {
        return Err(Error::Dataset(format!("{failures} of {} images failed", images.len())));
    }
    Ok(())
}

/// Parses one comma-separated span-label list per line; an empty line
/// means "no slot", which normalizes to the append-only extra label.
fn parse_label_file(path: &Path, expected: usize) -> Result<Vec<SpanLabelSet>> {
    let source = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = source.lines().collect();
    if lines.len() != expected {
        return Err(Error::Dataset(format!(
            "label file has {} lines, description has {expected} sentences",
            lines.len()
        )));
    }
    lines
        .iter()
        .map(|line| {
            let labels: Vec<SpanLabel> = line
                .split(',')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .map(SpanLabel::from_name)
                .collect::<Result<_>>()?;
            Ok(SpanLabelSet::from_labels(labels).normalized())
        })
        .collect()
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)?.lines().map(String::from).collect())
}

fn report_training(epoch_losses: &[f64], out: &Path) {
    match (epoch_losses.first(), epoch_losses.last()) {
        (Some(first), Some(last)) => {
            println!("trained {} epochs, loss {first:.6} -> {last:.6}", epoch_losses.len());
        }
        _ => println!("trained 0 epochs"),
    }
    println!("checkpoint saved to {}", out.display());
}
