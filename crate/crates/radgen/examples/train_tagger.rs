//! Training the multilabel image tagger on a small synthetic corpus.
//!
//! The tagger is a small convolutional network producing one sigmoid score
//! per tag. An image's tag set is every label scoring at least the decision
//! threshold; when nothing fires, the image is tagged `normal`. Training
//! minimizes mean binary cross-entropy with full-batch Adam steps, so the
//! loss decreases (near-)monotonically.
//!
//! Run with: `cargo run --release --example train_tagger`

use radgen::data::{derive_datasets, synthesize_corpus, PolarityConfig, SynthSpec};
use radgen::tagger::{
    load_tagger, save_tagger, tag_image, tag_sets_micro_prf, train_tagger, TaggerConfig,
};

fn main() -> radgen::Result<()> {
    let dir = tempfile::tempdir()?;
    let corpus = synthesize_corpus(
        &SynthSpec { size: 16, seed: 5, ..SynthSpec::default() },
        Some(dir.path()),
    )?;
    let rules = radgen::RuleTable::default_rules();
    let examples = derive_datasets(&corpus, &rules, &PolarityConfig::default())?.tagger;

    let config =
        TaggerConfig { epochs: 100, learning_rate: 0.01, ..TaggerConfig::default() };
    println!("training on {} images...", examples.len());
    let (model, log) = train_tagger(&examples, &config)?;
    println!(
        "loss {:.4} -> {:.4} over {} epochs ({} non-improving)",
        log.epoch_losses[0],
        log.epoch_losses.last().unwrap(),
        log.epoch_losses.len(),
        log.non_improving_epochs()
    );

    // Score the training set.
    let mut predicted = Vec::new();
    let mut expected = Vec::new();
    for example in &examples {
        predicted.push(tag_image(&model, &example.image)?.1);
        expected.push(example.tags.clone());
    }
    let (precision, recall, f1) = tag_sets_micro_prf(&predicted, &expected);
    println!("training-set micro P/R/F1: {precision:.3} / {recall:.3} / {f1:.3}");

    // Per-label scores for one image: everything at or above the threshold
    // becomes a tag.
    let example = &examples[0];
    let (scores, _) = tag_image(&model, &example.image)?;
    println!("\nscores for {} (threshold {}):", example.id, model.threshold());
    for (label, score) in model.label_names().iter().zip(&scores.values) {
        let mark = if *score >= model.threshold() { "*" } else { " " };
        println!("  {mark} {label:<16} {score:.3}");
    }
    println!("gold tags: {:?}", example.tags);

    // Checkpoints round-trip exactly.
    let ckpt = dir.path().join("tagger");
    save_tagger(&model, &ckpt)?;
    let reloaded = load_tagger(&ckpt)?;
    let (again, _) = tag_image(&reloaded, &example.image)?;
    println!("\nreloaded checkpoint scores identically: {}", again.values == scores.values);
    Ok(())
}
