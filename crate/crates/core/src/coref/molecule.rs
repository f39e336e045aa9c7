use std::fmt;

use serde::{Deserialize, Serialize};

/// Case-folds, collapses whitespace and maps Unicode dashes and quotes to
/// their ASCII forms.
pub fn normalize_name(raw: &str) -> String {
    let mapped: String = raw
        .chars()
        .map(|c| match c {
            '\u{2010}'..='\u{2015}' | '\u{2212}' | '\u{FE63}' | '\u{FF0D}' | '\u{00AD}' => '-',
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' | '`' | '\u{00B4}' => '\'',
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' => '"',
            c => c,
        })
        .collect();
    mapped
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// A molecule name with its comparison key. Serialized as the raw text.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MoleculeName {
    raw: String,
    normalized: String,
}

impl MoleculeName {
    /// `None` when the name normalizes to nothing.
    pub fn new(raw: impl Into<String>) -> Option<Self> {
        let raw = raw.into().trim().to_string();
        let normalized = normalize_name(&raw);
        (!normalized.is_empty()).then_some(Self { raw, normalized })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    pub fn same_molecule(&self, other: &MoleculeName) -> bool {
        self.normalized == other.normalized
    }
}

impl fmt::Display for MoleculeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl TryFrom<String> for MoleculeName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        MoleculeName::new(s).ok_or_else(|| "empty molecule name".to_string())
    }
}

impl From<MoleculeName> for String {
    fn from(m: MoleculeName) -> String {
        m.raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case_space_dashes_and_quotes() {
        assert_eq!(normalize_name("  Methyl\t4\u{2032}\u{2013}Methyl  Benzoate "), "methyl 4'-methyl benzoate");
        assert_eq!(normalize_name("\u{201C}A\u{201D}"), "\"a\"");
    }

    #[test]
    fn blank_names_are_rejected() {
        assert!(MoleculeName::new(" \n ").is_none());
    }

    #[test]
    fn serializes_as_raw_text() {
        let m = MoleculeName::new("4-Methylbenzaldehyde").unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "\"4-Methylbenzaldehyde\"");
        let back: MoleculeName = serde_json::from_str("\"4-Methylbenzaldehyde\"").unwrap();
        assert_eq!(back.normalized(), "4-methylbenzaldehyde");
    }
}
