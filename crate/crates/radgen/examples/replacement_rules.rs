//! The replacement engine on its own: no models, no training.
//!
//! A report starts as the fixed 23-sentence normal template. Each generated
//! pathological sentence carries a set of span labels naming the template
//! slots it supersedes: the engine replaces the first listed slot that is
//! still normal, removes the other listed slots, and appends sentences that
//! cover no slot (label `extra`) after the template body.
//!
//! Run with: `cargo run --example replacement_rules`

use radgen::build_report;
use radgen::corpus::{
    NormalTemplate, PathologicalDescription, RuleTable, SpanLabel, SpanLabelSet,
};

fn main() -> radgen::Result<()> {
    let template = NormalTemplate::default_template();
    let rules = RuleTable::default_rules();

    println!("The normal template has {} slots. The first three:", template.entries().len());
    for (label, sentence) in &template.entries()[..3] {
        println!("  {label:<8} {sentence}");
    }

    // A normal description leaves the template untouched.
    let normal = PathologicalDescription::normal();
    let verbatim = build_report(&template, &normal, &[])?.render();
    println!("\nNormal description renders the template verbatim: {}", verbatim == template.render());

    // A sentence covering {lung14, heart1}: lung14 (listed first) is
    // replaced, heart1 is removed outright.
    let description = PathologicalDescription::from_sentences(vec![
        "Stable cardiomegaly with large hiatal hernia.".to_string(),
    ]);
    let spans = vec![SpanLabelSet::from_labels([SpanLabel::Lung14, SpanLabel::Heart1])];
    let report = build_report(&template, &description, &spans)?.render();
    println!("\n{{lung14, heart1}} sentence:");
    println!("  lung14 slot replaced: {}", report.contains("Stable cardiomegaly"));
    println!(
        "  heart1 slot removed:  {}",
        !report.contains(slot_sentence(&template, SpanLabel::Heart1))
    );
    println!(
        "  lung14 slot gone:     {}",
        !report.contains(slot_sentence(&template, SpanLabel::Lung14))
    );

    // A sentence matching no slot is appended after the template body.
    let extra = PathologicalDescription::from_sentences(vec![
        "A feeding tube projects over the upper abdomen.".to_string(),
    ]);
    let spans = vec![SpanLabelSet::from_labels([SpanLabel::Extra])];
    let report = build_report(&template, &extra, &spans)?.render();
    println!("\nExtra sentence is appended at the end: {}", report.ends_with(&extra.sentences[0]));

    // Span labels usually come from the concept rule table rather than
    // being written by hand.
    for sentence in ["There is focal airspace disease.", "Stable cardiomegaly is noted."] {
        println!("\nRule annotation of {sentence:?}:");
        println!("  labels: {:?}", rules.match_labels(sentence));
    }

    // When two sentences list the same slot, the second finds it consumed
    // and falls back to the extras section — nothing is ever overwritten.
    let description = PathologicalDescription::from_sentences(vec![
        "The heart is enlarged.".to_string(),
        "Cardiac silhouette remains enlarged.".to_string(),
    ]);
    let spans = vec![
        SpanLabelSet::from_labels([SpanLabel::Heart1]),
        SpanLabelSet::from_labels([SpanLabel::Heart1]),
    ];
    let report = build_report(&template, &description, &spans)?.render();
    println!("\nTwo sentences claiming heart1:");
    println!("  first replaces the slot:   {}", report.contains("The heart is enlarged."));
    println!(
        "  second appended as extra:  {}",
        report.ends_with("Cardiac silhouette remains enlarged.")
    );
    Ok(())
}

fn slot_sentence(template: &NormalTemplate, label: SpanLabel) -> &str {
    template
        .entries()
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, s)| s.as_str())
        .expect("slot exists")
}
