//! Key-phrase OCR quality gate.
//!
//! Stock phrases that nearly every synthetic-chemistry paper prints verbatim
//! act as a probe: if a page contains one exactly, its OCR is trusted; if it
//! contains a near miss (one or two edits away), the page is flagged for
//! manual repair.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcrGateConfig {
    pub key_phrases: Vec<String>,
    pub fuzzy_max: usize,
}

impl Default for OcrGateConfig {
    fn default() -> Self {
        Self {
            key_phrases: ["General Procedure", "Typical Procedure", "General Experiment"]
                .map(String::from)
                .to_vec(),
            fuzzy_max: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcrStatus {
    Pass,
    Misspelled,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEvidence {
    pub target_phrase: String,
    pub matched_text: String,
    pub edit_distance: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrVerdict {
    pub status: OcrStatus,
    pub evidence: Vec<PhraseEvidence>,
}

/// Lowercases and collapses whitespace runs to single spaces.
pub(crate) fn normalize(text: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Best same-length window for `phrase` in `text`: `(distance, start)`.
fn best_window(text: &[char], phrase: &[char]) -> Option<(usize, usize)> {
    let n = phrase.len();
    if n == 0 || text.len() < n {
        return None;
    }
    let mut best: Option<(usize, usize)> = None;
    let mut row = vec![0usize; n + 1];
    for start in 0..=text.len() - n {
        let d = levenshtein_into(&text[start..start + n], phrase, &mut row);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, start));
            if d == 0 {
                break;
            }
        }
    }
    best
}

fn levenshtein_into(a: &[char], b: &[char], row: &mut Vec<usize>) -> usize {
    row.clear();
    row.extend(0..=b.len());
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            let cost = usize::from(ca != cb);
            row[j + 1] = (diag + cost).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

pub fn ocr_quality_gate(page_text: &str, cfg: &OcrGateConfig) -> OcrVerdict {
    let text = normalize(page_text);
    let mut evidence = Vec::new();
    for phrase in &cfg.key_phrases {
        let target = normalize(phrase);
        if let Some((d, start)) = best_window(&text, &target) {
            if d <= cfg.fuzzy_max {
                evidence.push(PhraseEvidence {
                    target_phrase: phrase.clone(),
                    matched_text: text[start..start + target.len()].iter().collect(),
                    edit_distance: d,
                });
            }
        }
    }
    let status = if evidence.iter().any(|e| e.edit_distance == 0) {
        OcrStatus::Pass
    } else if evidence.is_empty() {
        OcrStatus::Indeterminate
    } else {
        OcrStatus::Misspelled
    };
    if status == OcrStatus::Pass {
        // Near misses alongside an exact hit are not evidence of bad OCR.
        evidence.retain(|e| e.edit_distance == 0);
    }
    OcrVerdict { status, evidence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain recursive edit distance over every same-length window; shares no
    /// code with the implementation.
    fn oracle_min_distance(text: &str, phrase: &str) -> Option<usize> {
        use std::collections::HashMap;
        fn lev(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
            if a.is_empty() {
                return b.len();
            }
            if b.is_empty() {
                return a.len();
            }
            if let Some(&d) = memo.get(&(a.len(), b.len())) {
                return d;
            }
            let d = (lev(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]))
                .min(lev(&a[1..], b, memo) + 1)
                .min(lev(a, &b[1..], memo) + 1);
            memo.insert((a.len(), b.len()), d);
            d
        }
        let t: Vec<char> = text.to_lowercase().chars().collect();
        let p: Vec<char> = phrase.to_lowercase().chars().collect();
        (0..=t.len().checked_sub(p.len())?)
            .map(|s| lev(&t[s..s + p.len()], &p, &mut HashMap::new()))
            .min()
    }

    #[test]
    fn exact_phrase_passes() {
        let v = ocr_quality_gate("1. General Procedure for the coupling", &OcrGateConfig::default());
        assert_eq!(v.status, OcrStatus::Pass);
        assert_eq!(v.evidence.len(), 1);
        assert_eq!(v.evidence[0].edit_distance, 0);
        assert_eq!(v.evidence[0].target_phrase, "General Procedure");
    }

    #[test]
    fn one_substitution_is_misspelled() {
        let text = "Genera1 Procedure: aldehyde was added";
        let v = ocr_quality_gate(text, &OcrGateConfig::default());
        assert_eq!(v.status, OcrStatus::Misspelled);
        let e = &v.evidence[0];
        assert_eq!(e.edit_distance, 1);
        assert_eq!(oracle_min_distance(text, "General Procedure"), Some(1));
        assert_eq!(e.matched_text, "genera1 procedure");
    }

    #[test]
    fn unrelated_heading_is_indeterminate() {
        let v = ocr_quality_gate("Results and Discussion", &OcrGateConfig::default());
        assert_eq!(v.status, OcrStatus::Indeterminate);
        assert!(v.evidence.is_empty());
    }

    #[test]
    fn whitespace_is_normalized() {
        let v = ocr_quality_gate("General\n   Experiment", &OcrGateConfig::default());
        assert_eq!(v.status, OcrStatus::Pass);
    }

    #[test]
    fn matches_oracle_on_fixed_cases() {
        let cases = [
            "Typica1 Pr0cedure",
            "general experimemt details",
            "Genral Procedure",
            "nothing relevant here at all",
            "Typical  Procedure",
        ];
        let cfg = OcrGateConfig::default();
        for text in cases {
            let v = ocr_quality_gate(text, &cfg);
            let oracle: Vec<(String, usize)> = cfg
                .key_phrases
                .iter()
                .filter_map(|p| {
                    let norm: String = normalize(text).into_iter().collect();
                    oracle_min_distance(&norm, p)
                        .filter(|d| *d <= cfg.fuzzy_max)
                        .map(|d| (p.clone(), d))
                })
                .collect();
            let min_oracle = oracle.iter().map(|(_, d)| *d).min();
            let min_impl = v.evidence.iter().map(|e| e.edit_distance).min();
            assert_eq!(min_impl, min_oracle, "{text}");
        }
    }

    proptest! {
        #[test]
        fn verdict_is_case_insensitive(text in "[a-zA-Z0-9 ]{0,60}") {
            let cfg = OcrGateConfig::default();
            let a = ocr_quality_gate(&text, &cfg);
            prop_assert_eq!(&a, &ocr_quality_gate(&text.to_uppercase(), &cfg));
            prop_assert_eq!(&a, &ocr_quality_gate(&text.to_lowercase(), &cfg));
        }

        #[test]
        fn appending_exact_phrase_passes(text in "[a-zA-Z0-9 .]{0,60}", which in 0usize..3) {
            let cfg = OcrGateConfig::default();
            let extended = format!("{text} {}", cfg.key_phrases[which]);
            prop_assert_eq!(ocr_quality_gate(&extended, &cfg).status, OcrStatus::Pass);
        }
    }
}
