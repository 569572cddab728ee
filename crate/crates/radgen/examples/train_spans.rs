//! Training the span identifier against the rule-table oracle.
//!
//! The span identifier reads one generated sentence and scores the 24 span
//! labels (23 template slots + `extra`) with independent sigmoid heads over
//! a mean-pooled word-embedding encoding. Training data comes free: the
//! concept rule table annotates any sentence, so synthetic sentences plus
//! `annotate_span_labels` give unlimited labeled examples, and a held-out
//! split measures how well the trained model matches the rules it never saw
//! applied.
//!
//! Run with: `cargo run --release --example train_spans`

use radgen::corpus::RuleTable;
use radgen::data::{synth_span_sentences, SpanExample};
use radgen::spans::{identify_spans, span_sets_micro_prf, train_spans, SpanConfig};

fn main() -> radgen::Result<()> {
    let rules = RuleTable::default_rules();
    let train = synth_span_sentences(300, 11, &rules);
    let held_out = synth_span_sentences(80, 99, &rules);

    let examples: Vec<SpanExample> = train
        .iter()
        .map(|(sentence, labels)| SpanExample {
            sentence: sentence.clone(),
            labels: labels.labels().to_vec(),
        })
        .collect();

    let config = SpanConfig { epochs: 40, learning_rate: 0.01, ..SpanConfig::default() };
    println!("training on {} rule-annotated sentences...", examples.len());
    let (model, log) = train_spans(&examples, &config)?;
    println!(
        "loss {:.4} -> {:.4}\n",
        log.epoch_losses[0],
        log.epoch_losses.last().unwrap()
    );

    // Held-out sentences: compare the model against the rule annotations.
    let predicted: Vec<_> = held_out.iter().map(|(s, _)| identify_spans(&model, s)).collect();
    let expected: Vec<_> = held_out.iter().map(|(_, l)| l.clone()).collect();
    let (precision, recall, f1) = span_sets_micro_prf(&predicted, &expected);
    println!("held-out micro P/R/F1 vs rule oracle: {precision:.3} / {recall:.3} / {f1:.3}\n");

    for (sentence, gold) in &held_out[..6] {
        let got = identify_spans(&model, sentence);
        let mark = if got.labels() == gold.labels() { "=" } else { "!" };
        println!("{mark} {sentence}");
        println!("    gold: {:?}", gold.labels());
        println!("    got:  {:?}", got.labels());
    }

    // Predictions are always normalized: never empty, and `extra` never
    // mixes with slot labels.
    let odd = identify_spans(&model, "zzz quux unseen words");
    println!("\nnonsense sentence still yields a normalized set: {:?}", odd.labels());
    Ok(())
}
