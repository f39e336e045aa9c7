//! Coreference label grammar and context validation.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const ACCEPT_CUES: [&str; 6] = ["compound", "product", "item", "substrate", "catalyst", "intermediate"];
pub const ANTI_CUES: [&str; 7] = ["figure", "fig.", "table", "scheme", "eq.", "section", "page"];

/// Trailing words that only name a molecule together with the word before.
const CLASS_WORDS: [&str; 9] = ["acid", "ester", "salt", "chloride", "bromide", "iodide", "oxide", "ether", "anhydride"];
const CHEMICAL_SUFFIXES: [&str; 17] = [
    "ane", "ene", "yne", "ol", "al", "one", "ide", "ate", "ite", "ine", "yl", "hyde", "ium", "ole", "ose", "ic", "ile",
];

/// One to three digits followed by up to two lowercase letters, whole token.
pub fn matches_label_pattern(token: &str) -> bool {
    let digits = token.chars().take_while(|c| c.is_ascii_digit()).count();
    let rest = &token[digits..];
    (1..=3).contains(&digits) && rest.len() <= 2 && rest.chars().all(|c| c.is_ascii_lowercase())
}

/// A validated label, stored lowercase.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CorefLabel(String);

impl CorefLabel {
    pub fn new(text: &str) -> Option<Self> {
        matches_label_pattern(text).then(|| Self(text.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CorefLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CorefLabel {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        CorefLabel::new(&s).ok_or_else(|| format!("{s:?} is not a coreference label"))
    }
}

impl From<CorefLabel> for String {
    fn from(l: CorefLabel) -> String {
        l.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    PatternMismatch,
    NoContextCue { anti_cue: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelVerdict {
    Accept,
    Reject(RejectReason),
}

impl LabelVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, LabelVerdict::Accept)
    }
}

/// Heuristic for "looks like part of a chemical name": long enough and
/// carrying a locant, a hyphen or a typical suffix.
pub fn is_chemical_looking(token: &str) -> bool {
    let t = token.trim_matches(|c: char| matches!(c, ',' | ';' | '.' | ':'));
    if t.chars().count() < 8 || !t.chars().any(char::is_alphabetic) {
        return false;
    }
    let lower = t.to_lowercase();
    t.chars().any(|c| c.is_ascii_digit())
        || t.contains('-')
        || CHEMICAL_SUFFIXES.iter().any(|s| lower.ends_with(s))
}

fn preceding_words(text: &str) -> Vec<&str> {
    text.split_whitespace().rev().take(2).collect()
}

fn is_token_boundary(c: Option<char>) -> bool {
    c.is_none_or(|c| !c.is_alphanumeric())
}

/// Byte offsets of whole-token occurrences of `token` in `text`.
pub(crate) fn occurrences(text: &str, token: &str) -> Vec<usize> {
    let mut out = Vec::new();
    if token.is_empty() {
        return out;
    }
    let mut from = 0;
    while let Some(pos) = text[from..].find(token) {
        let start = from + pos;
        let end = start + token.len();
        if is_token_boundary(text[..start].chars().next_back()) && is_token_boundary(text[end..].chars().next()) {
            out.push(start);
        }
        from = start + token.len().max(1);
        while !text.is_char_boundary(from) {
            from += 1;
        }
    }
    out
}

fn name_before_paren(before: &str) -> bool {
    let words = preceding_words(before);
    match words.as_slice() {
        [last, prev, ..] if CLASS_WORDS.contains(&last.to_lowercase().as_str()) => {
            is_chemical_looking(last) || is_chemical_looking(&format!("{prev} {last}").replace(' ', ""))
        }
        [last, ..] => is_chemical_looking(last),
        [] => false,
    }
}

enum Occurrence {
    Accept,
    Anti(String),
    Neutral,
}

fn judge(text: &str, start: usize, token: &str, bold: bool) -> Occurrence {
    let before = &text[..start];
    let after = &text[start + token.len()..];
    let prev = before.split_whitespace().next_back().map(|w| {
        let w = w.to_lowercase();
        let keep_dot = ANTI_CUES.iter().any(|c| c.ends_with('.') && *c == w);
        if keep_dot {
            w
        } else {
            w.trim_end_matches([',', ':', ';', '.']).to_string()
        }
    });
    if let Some(p) = &prev {
        if let Some(cue) = ANTI_CUES.iter().find(|c| *c == p) {
            return Occurrence::Anti(cue.to_string());
        }
        if ACCEPT_CUES.contains(&p.as_str()) {
            return Occurrence::Accept;
        }
    }
    if bold {
        return Occurrence::Accept;
    }
    let in_parens = before.ends_with('(') && after.starts_with(')');
    if in_parens && name_before_paren(before[..before.len() - 1].trim_end()) {
        return Occurrence::Accept;
    }
    let rest = after.trim_start();
    if let Some(def) = rest.strip_prefix('=').or_else(|| rest.strip_prefix(':')) {
        if def.split_whitespace().any(is_chemical_looking) {
            return Occurrence::Accept;
        }
    }
    Occurrence::Neutral
}

/// Accepts `token` when it has the label shape and at least one of its
/// occurrences in `context` carries a cue. An occurrence directly preceded
/// by an anti-cue word never counts, whatever else surrounds it.
pub fn validate_label(token: &str, context: &str) -> LabelVerdict {
    validate_label_styled(token, context, false)
}

/// [`validate_label`] with knowledge of whether the label is set in bold.
pub fn validate_label_styled(token: &str, context: &str, bold: bool) -> LabelVerdict {
    if !matches_label_pattern(token) {
        return LabelVerdict::Reject(RejectReason::PatternMismatch);
    }
    let mut anti_cue = None;
    for start in occurrences(context, token) {
        match judge(context, start, token, bold) {
            Occurrence::Accept => return LabelVerdict::Accept,
            Occurrence::Anti(c) => anti_cue = anti_cue.or(Some(c)),
            Occurrence::Neutral => {}
        }
    }
    LabelVerdict::Reject(RejectReason::NoContextCue { anti_cue })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_grammar() {
        for ok in ["1", "1b", "12aa", "999"] {
            assert!(matches_label_pattern(ok), "{ok}");
        }
        for bad in ["", "b1", "1234", "1abc", "1B", "Amphos", "1-b"] {
            assert!(!matches_label_pattern(bad), "{bad}");
        }
    }

    #[test]
    fn product_cue_accepts() {
        assert_eq!(validate_label("1b", "the product 1b was obtained"), LabelVerdict::Accept);
    }

    #[test]
    fn trade_name_is_pattern_mismatch() {
        assert_eq!(
            validate_label("Amphos", "compound Amphos"),
            LabelVerdict::Reject(RejectReason::PatternMismatch)
        );
    }

    #[test]
    fn figure_reference_is_rejected() {
        assert_eq!(
            validate_label("5a", "Figure 5a shows"),
            LabelVerdict::Reject(RejectReason::NoContextCue {
                anti_cue: Some("figure".into())
            })
        );
        assert!(!validate_label("2", "see Fig. 2 for details").is_accept());
    }

    #[test]
    fn parenthesised_after_chemical_name() {
        assert!(validate_label("1b", "4-methylbenzaldehyde (1b) was added").is_accept());
        assert!(validate_label("2a", "4-methoxybenzoic acid (2a)").is_accept());
        assert!(!validate_label("25", "at room temperature (25) overnight").is_accept());
        assert!(!validate_label("1b", "the mixture (1b)").is_accept());
    }

    #[test]
    fn definition_and_bold_cues() {
        assert!(validate_label("2d", "2d = methyl 4-iodobenzoate").is_accept());
        assert!(!validate_label("3", "entry 3 gave").is_accept());
        assert!(validate_label_styled("3", "entry 3 gave", true).is_accept());
    }

    #[test]
    fn substring_matches_are_not_occurrences() {
        assert_eq!(occurrences("11b 1b x1b 1b.", "1b"), vec![4, 11]);
    }
}
