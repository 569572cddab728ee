//! Turning a report corpus into the three stage-specific training sets.
//!
//! A corpus record carries free text (findings, impression) plus whatever
//! annotations it has. Derivation produces:
//!
//! 1. tagger examples — (image path, tag set) for records that have both;
//! 2. generator pairs — tag sequence → pathological description, where the
//!    pathological sentences are picked out of the full report text by a
//!    small bag-of-words polarity classifier trained on the corpus's own
//!    sentence annotations (all-normal reports pair with the sentinel);
//! 3. span examples — unique pathological sentences with gold span labels
//!    where the record carries them, rule-table annotations otherwise.
//!
//! Run with: `cargo run --example derive_datasets`

use radgen::corpus::RuleTable;
use radgen::data::{
    derive_datasets, save_jsonl, synthesize_corpus, PolarityConfig, SynthSpec,
};

fn main() -> radgen::Result<()> {
    let image_dir = tempfile::tempdir()?;
    let corpus = synthesize_corpus(
        &SynthSpec { size: 20, seed: 3, ..SynthSpec::default() },
        Some(image_dir.path()),
    )?;
    let rules = RuleTable::default_rules();

    let datasets = derive_datasets(&corpus, &rules, &PolarityConfig::default())?;
    println!(
        "derived: {} tagger examples, {} pairs, {} span examples\n",
        datasets.tagger.len(),
        datasets.pairs.len(),
        datasets.spans.len()
    );

    let tagger = &datasets.tagger[0];
    println!("tagger example {}: {:?} tagged {:?}", tagger.id, tagger.image, tagger.tags);

    let pair = datasets.pairs.iter().find(|p| p.tags != ["normal"]).expect("abnormal record");
    println!("\npair {}:", pair.id);
    println!("  tags:        {:?}", pair.tags);
    println!("  description: {:?}", pair.description);

    let record = corpus.iter().find(|r| r.id == pair.id).expect("source record");
    println!("  full findings text it was separated from:");
    println!("    {}", record.findings);

    let normal = datasets.pairs.iter().find(|p| p.tags == ["normal"]).expect("normal record");
    println!("\nall-normal record {} pairs with the sentinel: {:?}", normal.id, normal.description);

    let span = &datasets.spans[0];
    println!("\nspan example: {:?} -> {:?}", span.sentence, span.labels);

    // The three files the training subcommands consume.
    let dir = tempfile::tempdir()?;
    save_jsonl(dir.path().join("tagger.jsonl"), &datasets.tagger)?;
    save_jsonl(dir.path().join("pairs.jsonl"), &datasets.pairs)?;
    save_jsonl(dir.path().join("spans.jsonl"), &datasets.spans)?;
    println!("\nwrote tagger.jsonl, pairs.jsonl, spans.jsonl under {}", dir.path().display());
    Ok(())
}
