//! Text normalization and the two length units used across languages.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// How a language's text is segmented into tokens and measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Word,
    Character,
}

/// NFC, collapse runs of whitespace (including line breaks) to a single space, trim.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case-folded form of [`normalize`], used for "up to capitalization" comparisons.
pub fn fold(text: &str) -> String {
    normalize(text).to_lowercase()
}

/// First paragraph of a raw article: everything before the first blank line.
pub fn first_paragraph(raw: &str) -> String {
    let mut lines = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            if lines.is_empty() {
                continue;
            }
            break;
        }
        lines.push(line);
    }
    normalize(&lines.join(" "))
}

/// Segment normalized text into tokens in the given unit.
pub fn tokenize(text: &str, unit: LengthUnit) -> Vec<String> {
    let norm = normalize(text);
    match unit {
        LengthUnit::Word => norm.split_whitespace().map(str::to_owned).collect(),
        LengthUnit::Character => norm
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_string())
            .collect(),
    }
}

/// Inverse of [`tokenize`] for display purposes.
pub fn detokenize<S: AsRef<str>>(tokens: &[S], unit: LengthUnit) -> String {
    match unit {
        LengthUnit::Word => tokens
            .iter()
            .map(|t| t.as_ref())
            .collect::<Vec<_>>()
            .join(" "),
        LengthUnit::Character => tokens.iter().map(|t| t.as_ref()).collect(),
    }
}

/// Length of a text in the given unit.
pub fn length(text: &str, unit: LengthUnit) -> usize {
    tokenize(text, unit).len()
}
