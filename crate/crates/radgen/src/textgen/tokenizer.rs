//! Case-preserving word tokenizer and its inverse.
//!
//! The generator's vocabulary is built over words and detached punctuation:
//! text splits on whitespace, then sentence punctuation is peeled off the
//! ends of each chunk into tokens of its own, while interior punctuation
//! (hyphens, slashes, decimal points) stays attached. [`detokenize`]
//! re-applies standard spacing, so conventionally punctuated text survives a
//! tokenize→detokenize round trip byte for byte — the property that lets a
//! memorized training sentence be regenerated exactly.

/// Punctuation peeled off chunk boundaries into standalone tokens.
fn peelable(c: char) -> bool {
    matches!(
        c,
        ',' | '.' | ';' | ':' | '!' | '?' | '(' | ')' | '[' | ']' | '"'
    )
}

/// Splits text into word and punctuation tokens, preserving case.
pub fn word_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && peelable(chars[lo]) {
            tokens.push(chars[lo].to_string());
            lo += 1;
        }
        let mut trailing = Vec::new();
        while hi > lo && peelable(chars[hi - 1]) {
            trailing.push(chars[hi - 1].to_string());
            hi -= 1;
        }
        if lo < hi {
            tokens.push(chars[lo..hi].iter().collect());
        }
        trailing.reverse();
        tokens.extend(trailing);
    }
    tokens
}

/// Tokens that attach to the preceding token without a space.
fn glues_left(token: &str) -> bool {
    matches!(token, "," | "." | ";" | ":" | "!" | "?" | ")" | "]")
}

/// Tokens the following token attaches to without a space.
fn glues_right(token: &str) -> bool {
    matches!(token, "(" | "[")
}

/// Joins tokens with conventional spacing: no space before closing
/// punctuation, none after an opening bracket.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut suppress_space = true;
    for token in tokens {
        if !suppress_space && !glues_left(token) {
            out.push(' ');
        }
        out.push_str(token);
        suppress_space = glues_right(token);
    }
    out
}
