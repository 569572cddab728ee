//! Scoring generated reports: text overlap (BLEU-1..4, ROUGE-L, METEOR,
//! CIDEr) plus clinical efficacy (CE), which ignores wording and compares
//! the *concepts* each report asserts.
//!
//! CE uses the same rule table as span annotation: a concept counts only
//! when its sentence asserts it, so "No pneumothorax." contributes nothing.
//! Pre-computed concept labels from an external tool can stand in for the
//! rule table when available.
//!
//! Run with: `cargo run --example evaluate_reports`

use radgen::corpus::RuleTable;
use radgen::eval::{evaluate_corpus, extract_concepts, RuleLabeler};

fn main() -> radgen::Result<()> {
    let rules = RuleTable::default_rules();

    // Concept extraction drives the CE numbers. Negated mentions are
    // filtered out.
    for sentence in [
        "There is a calcified granuloma in the right upper lobe.",
        "No nodule or infiltrate is seen.",
        "Stable cardiomegaly and mild scoliosis.",
    ] {
        println!("{sentence:?}\n  asserts {:?}", extract_concepts(sentence, &rules));
    }

    let candidates = vec![
        // Perfect match.
        "Cardiomegaly is present. The lungs are clear.".to_string(),
        // Same concept, different words: CE credits it, BLEU only partially.
        "Stable cardiomegaly is seen again.".to_string(),
        // Hallucinated concept: costs CE precision.
        "There is a large nodule.".to_string(),
        // Missed concept: costs CE recall.
        "The lungs are clear.".to_string(),
    ];
    let references = vec![
        "Cardiomegaly is present. The lungs are clear.".to_string(),
        "There is cardiomegaly.".to_string(),
        "The lungs are well expanded and clear.".to_string(),
        "Left basilar atelectasis is seen.".to_string(),
    ];

    let report = evaluate_corpus(&candidates, &references, &RuleLabeler(&rules))?;
    println!("\n{}", report.to_table());

    // Identical corpora score 1.0 on every pairwise text metric.
    let identity = evaluate_corpus(&references, &references, &RuleLabeler(&rules))?;
    println!(
        "identity check: BLEU-1 {} ROUGE-L {} METEOR {} CE F1 {}",
        identity.bleu1, identity.rouge_l, identity.meteor, identity.ce_f1
    );
    Ok(())
}
