//! Whitespace normalisation and sentence segmentation.
//!
//! Radiology report sections arrive as free text with arbitrary line breaks
//! and spacing. All downstream processing (rule matching, span annotation,
//! template replacement) operates on whitespace-normalised text split into
//! sentences, so both operations live here and everything else calls them.

/// Collapses every run of whitespace to a single space and trims the ends.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Abbreviations after which a period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "vs", "etc", "fig", "eg", "ie", "cf", "al", "approx",
];

/// Splits normalised text into sentences.
///
/// A sentence boundary is a `.`, `?`, or `!` followed by whitespace and an
/// uppercase letter or digit. Periods after common abbreviations (and after
/// single letters, as in initials or list markers) do not split. A trailing
/// chunk without terminal punctuation still counts as a sentence, since
/// report sections are frequently truncated mid-dictation.
///
/// Joining the returned sentences with single spaces reproduces
/// `normalize_ws(text)` exactly.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let normalized = normalize_ws(text);
    if normalized.is_empty() {
        return Vec::new();
    }

    let chars: Vec<char> = normalized.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '?' | '!') && i + 2 < chars.len() && chars[i + 1] == ' ' {
            let next = chars[i + 2];
            let boundary = (next.is_uppercase() || next.is_ascii_digit())
                && !(c == '.' && ends_with_abbreviation(&chars[start..i]));
            if boundary {
                sentences.push(chars[start..=i].iter().collect());
                start = i + 2;
                i += 2;
                continue;
            }
        }
        i += 1;
    }
    if start < chars.len() {
        sentences.push(chars[start..].iter().collect());
    }
    sentences
}

/// True when the word immediately before a period is an abbreviation or a
/// lone letter, meaning the period is not a sentence terminator.
fn ends_with_abbreviation(before: &[char]) -> bool {
    let word_start = before
        .iter()
        .rposition(|c| !c.is_alphabetic())
        .map(|p| p + 1)
        .unwrap_or(0);
    let word: String = before[word_start..].iter().collect::<String>().to_lowercase();
    word.len() == 1 || ABBREVIATIONS.contains(&word.as_str())
}
