//! Training the tag-conditioned description generator.
//!
//! The generator is a one-layer encoder-decoder transformer over word
//! tokens. Its input is the serialized tag sequence ("cardiomegaly,
//! nodule"), its output the pathological description, decoded with
//! length-normalized beam search. The `normal` tag set never reaches the
//! model: it short-circuits to the fixed sentinel sentence.
//!
//! Lines marked `!` below are input collisions, not optimization failures:
//! when the corpus pairs one tag set with two different descriptions, a
//! deterministic decoder necessarily settles on one of them.
//!
//! Run with: `cargo run --release --example train_generator`

use radgen::corpus::NORMAL_SENTINEL;
use radgen::data::{derive_datasets, synthesize_corpus, PolarityConfig, SynthSpec};
use radgen::textgen::{generate_description, train_generator, GeneratorConfig};

fn main() -> radgen::Result<()> {
    let corpus = synthesize_corpus(&SynthSpec { size: 12, seed: 21, ..SynthSpec::default() }, None)?;
    let rules = radgen::RuleTable::default_rules();
    let pairs = derive_datasets(&corpus, &rules, &PolarityConfig::default())?.pairs;

    let config = GeneratorConfig {
        epochs: 150,
        learning_rate: 0.01,
        lr_decay: 0.99,
        ..GeneratorConfig::default()
    };
    println!("memorizing {} tag -> description pairs...", pairs.len());
    let (model, log) = train_generator(&pairs, &config)?;
    println!(
        "loss {:.4} -> {:.4}; vocabulary {} tokens; beam width {}\n",
        log.epoch_losses[0],
        log.epoch_losses.last().unwrap(),
        model.vocab().len(),
        model.beam_width()
    );

    // Regenerate every training description from its tags.
    let mut exact = 0;
    for pair in &pairs {
        let decoded = generate_description(&model, &pair.tags)?;
        let hit = decoded.sentences == pair.description;
        exact += hit as usize;
        if pair.tags != ["normal"] {
            let mark = if hit { "=" } else { "!" };
            println!("{mark} {:?}", pair.tags);
            println!("    want: {:?}", pair.description.join(" "));
            println!("    got:  {:?}", decoded.sentences.join(" "));
        }
    }
    println!("\nexact regenerations: {exact}/{}", pairs.len());

    // The normal bypass: no decoding happens at all.
    let normal = generate_description(&model, &["normal".to_string()])?;
    println!("[\"normal\"] -> {:?} (is_normal: {})", normal.sentences, normal.is_normal);
    assert_eq!(normal.sentences, [NORMAL_SENTINEL]);
    Ok(())
}
