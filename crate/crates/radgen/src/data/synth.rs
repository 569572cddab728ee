//! Synthetic desk-scale corpus generation.
//!
//! Each synthetic study draws a tag subset from configurable priors,
//! renders an image whose pixel content encodes exactly that tag set
//! (one bright glyph per tag at a fixed grid cell over seeded noise), and
//! assembles gold text by substituting one concept-bearing pathological
//! sentence per tag into the normal template. Every downstream stage
//! therefore has learnable signal, and the gold report is exactly what a
//! perfect pipeline would produce.

use std::path::Path;

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    CorpusRecord, NormalTemplate, PathologicalDescription, RuleTable, SpanLabelSet,
};
use crate::error::{Error, Result};
use crate::replace::build_report;

use super::annotate_span_labels;

/// Parameters of one synthetic corpus.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Number of records.
    pub size: usize,
    /// Tag names; each is a concept the rule table knows.
    pub tag_vocab: Vec<String>,
    /// Independent per-tag inclusion probability, parallel to `tag_vocab`.
    pub tag_priors: Vec<f64>,
    pub seed: u64,
    /// Square image edge length in pixels.
    pub image_size: u32,
}

impl Default for SynthSpec {
    fn default() -> SynthSpec {
        let tag_vocab = default_tag_vocab();
        let tag_priors = vec![0.15; tag_vocab.len()];
        SynthSpec {
            size: 100,
            tag_vocab,
            tag_priors,
            seed: 7,
            image_size: 224,
        }
    }
}

/// The eight default synthetic tags — concepts the rule table maps to
/// template slots.
pub fn default_tag_vocab() -> Vec<String> {
    [
        "cardiomegaly",
        "nodule",
        "consolidation",
        "atelectasis",
        "pulmonary edema",
        "granuloma",
        "scoliosis",
        "infiltrate",
    ]
    .map(String::from)
    .to_vec()
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.tag_vocab.is_empty() {
            return Err(Error::Config("synthetic tag vocabulary is empty".into()));
        }
        if self.tag_priors.len() != self.tag_vocab.len() {
            return Err(Error::Config(format!(
                "{} tag priors for {} tags",
                self.tag_priors.len(),
                self.tag_vocab.len()
            )));
        }
        if self.tag_priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("tag priors must lie in [0, 1]".into()));
        }
        let mut names = self.tag_vocab.clone();
        names.sort();
        names.dedup();
        if names.len() != self.tag_vocab.len() {
            return Err(Error::Config("duplicate synthetic tag name".into()));
        }
        if self.image_size < 16 {
            return Err(Error::Config("image size must be at least 16".into()));
        }
        Ok(())
    }
}

/// One pathological sentence containing `concept` verbatim. Frame words
/// never collide with rule concepts, so span labels come from the concept
/// alone.
fn pathological_sentence(frame: usize, concept: &str) -> String {
    match frame % 6 {
        0 => format!("There is {concept}."),
        1 => format!("Findings show {concept}."),
        2 => format!("There is evidence of {concept}."),
        3 => format!("Mild {concept} is seen."),
        4 => format!("Stable {concept} is noted."),
        _ => format!("Increased {concept} compared to prior."),
    }
}

/// Grid geometry: glyph cells arranged in the smallest near-square grid
/// holding `tag_count` cells.
pub fn glyph_grid(tag_count: usize, image_size: u32) -> (u32, u32, u32, u32) {
    let cols = (tag_count as f64).sqrt().ceil() as u32;
    let rows = (tag_count as u32).div_ceil(cols);
    (cols, rows, image_size / cols, image_size / rows)
}

/// Pixel bounds (x0, y0, x1, y1) of the glyph for tag index `t`.
pub fn glyph_bounds(t: usize, tag_count: usize, image_size: u32) -> (u32, u32, u32, u32) {
    let (cols, _rows, cell_w, cell_h) = glyph_grid(tag_count, image_size);
    let cx = (t as u32 % cols) * cell_w;
    let cy = (t as u32 / cols) * cell_h;
    (
        cx + cell_w / 5,
        cy + cell_h / 5,
        cx + cell_w * 4 / 5,
        cy + cell_h * 4 / 5,
    )
}

fn render_image(rng: &mut ChaCha8Rng, spec: &SynthSpec, drawn: &[usize]) -> GrayImage {
    let size = spec.image_size;
    let mut img = GrayImage::new(size, size);
    for pixel in img.pixels_mut() {
        pixel.0 = [rng.gen_range(15..46)];
    }
    for &t in drawn {
        let (x0, y0, x1, y1) = glyph_bounds(t, spec.tag_vocab.len(), size);
        for y in y0..y1 {
            for x in x0..x1 {
                img.put_pixel(x, y, image::Luma([235 + rng.gen_range(0..20u8)]));
            }
        }
    }
    img
}

/// Generates a corpus. When `image_dir` is given, one PNG per record is
/// written there and referenced from the record; otherwise records carry
/// no image. Per-record generator streams make the text content identical
/// in both modes and byte-identical across reruns.
pub fn synthesize_corpus(
    spec: &SynthSpec,
    image_dir: Option<&Path>,
) -> Result<Vec<CorpusRecord>> {
    spec.validate()?;
    if let Some(dir) = image_dir {
        std::fs::create_dir_all(dir)?;
    }
    let template = NormalTemplate::default_template();
    let rules = RuleTable::default_rules();

    let mut records = Vec::with_capacity(spec.size);
    for i in 0..spec.size {
        let mut rng = ChaCha8Rng::seed_from_u64(
            spec.seed
                .wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let id = format!("synth-{i:05}");

        let drawn: Vec<usize> = spec
            .tag_priors
            .iter()
            .enumerate()
            .filter(|(_, &p)| rng.gen::<f64>() < p)
            .map(|(t, _)| t)
            .collect();

        let mut record = if drawn.is_empty() {
            CorpusRecord {
                id: id.clone(),
                image: None,
                tags: vec!["normal".into()],
                findings: template.render(),
                impression: String::new(),
                pathological: vec![],
                span_labels: Default::default(),
            }
        } else {
            let tags: Vec<String> =
                drawn.iter().map(|&t| spec.tag_vocab[t].clone()).collect();
            let sentences: Vec<String> = tags
                .iter()
                .map(|tag| pathological_sentence(rng.gen_range(0..6), tag))
                .collect();
            let spans: Vec<SpanLabelSet> = sentences
                .iter()
                .map(|s| annotate_span_labels(s, &rules))
                .collect();
            let description = PathologicalDescription::from_sentences(sentences.clone());
            let findings = build_report(&template, &description, &spans)?.render();
            let impression = if rng.gen::<f64>() < 0.25 {
                sentences.last().cloned().unwrap_or_default()
            } else {
                String::new()
            };
            let span_labels = sentences
                .iter()
                .zip(&spans)
                .map(|(s, set)| (s.clone(), set.labels().to_vec()))
                .collect();
            CorpusRecord {
                id: id.clone(),
                image: None,
                tags,
                findings,
                impression,
                pathological: sentences,
                span_labels,
            }
        };

        if let Some(dir) = image_dir {
            let img = render_image(&mut rng, spec, &drawn);
            let path = dir.join(format!("{id}.png"));
            img.save(&path)?;
            record.image = Some(path.to_string_lossy().into_owned());
        }
        records.push(record);
    }
    Ok(records)
}

/// Standalone concept-free sentences for the span identifier's `extra`
/// class.
const EXTRA_SENTENCES: [&str; 5] = [
    "Multiple surgical clips are noted.",
    "Limited exam due to patient motion.",
    "The endotracheal tube is in standard position.",
    "Surgical staples project over the upper abdomen.",
    "A left-sided port catheter tip overlies the cavoatrial junction.",
];

/// Generates labeled sentences for span-identifier training: a mix of
/// rule-free sentences (labeled `{extra}`), single-concept sentences, and
/// two-concept sentences, each annotated by the rule table.
pub fn synth_span_sentences(
    count: usize,
    seed: u64,
    rules: &RuleTable,
) -> Vec<(String, SpanLabelSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concepts: Vec<&str> = rules.rules().iter().map(|r| r.concept.as_str()).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let draw = rng.gen::<f64>();
        let sentence = if draw < 0.15 || concepts.is_empty() {
            EXTRA_SENTENCES[rng.gen_range(0..EXTRA_SENTENCES.len())].to_string()
        } else if draw < 0.85 {
            let c = concepts[rng.gen_range(0..concepts.len())];
            pathological_sentence(rng.gen_range(0..6), c)
        } else {
            let a = rng.gen_range(0..concepts.len());
            let b = (a + 1 + rng.gen_range(0..concepts.len() - 1)) % concepts.len();
            format!("There is {} with {}.", concepts[a], concepts[b])
        };
        let labels = annotate_span_labels(&sentence, rules);
        out.push((sentence, labels));
    }
    out
}
