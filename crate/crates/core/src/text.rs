//! The one tokenizer used by every scorer and filter.

/// Lowercased tokens: split on Unicode whitespace, then strip leading and
/// trailing punctuation from each piece. Pieces that are pure punctuation
/// are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c)))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Raw whitespace word count, as used by the length filter and POS tags.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2018}'..='\u{201F}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
    )
}
