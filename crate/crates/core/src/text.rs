//! Token normalisation shared by the corpus, alias matching and masking.
//!
//! Three forms of a token are in play:
//! - display text, NFC-normalised but otherwise as written;
//! - lower text, used for questions and passages handed to the model;
//! - match key, lower text with leading and trailing punctuation trimmed,
//!   used for every alias comparison.

use unicode_normalization::UnicodeNormalization;

/// Literal used both as the relation mask and as the entity mask.
pub const MASK: &str = "<mask>";

pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

pub fn lower(s: &str) -> String {
    s.nfc().collect::<String>().to_lowercase()
}

/// Comparison key of a single token. The mask literal keeps its own key so
/// that masked positions never collide with an alias.
pub fn match_key(token: &str) -> String {
    if token == MASK {
        return MASK.to_string();
    }
    let low = lower(token);
    low.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

/// Whitespace tokenisation of a surface string into match keys.
pub fn key_sequence(surface: &str) -> Vec<String> {
    surface.split_whitespace().map(match_key).collect()
}

/// Canonical form of a title: NFC, case-folded, whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    lower(title).split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Alias form: match keys joined by single spaces.
pub fn alias_form(surface: &str) -> String {
    key_sequence(surface).join(" ")
}

pub fn contains_mask_literal(s: &str) -> bool {
    s.to_lowercase().contains(MASK)
}
