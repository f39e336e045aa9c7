use std::collections::BTreeSet;

use super::{
    ask, commit, decide_pairs, provenance, AgentConfig, AgentError, ExpectedShape, ExtractionBackend, PairDecision,
    PairOutcome, Parsed, TemplateSet,
};
use crate::coref::{AgentId, Modality, SharedDictionary};
use crate::doc::{order_chars, render_text, Page, TextOptions};
use crate::ingest::SectionKind;

/// Words typeset entirely in bold on `page`, stripped of punctuation.
pub fn bold_tokens(page: &Page) -> BTreeSet<String> {
    let bold: Vec<_> = page.chars().filter(|c| c.bold).collect();
    if bold.is_empty() {
        return BTreeSet::new();
    }
    let text = render_text(&order_chars(&bold, TextOptions::default().row_tol), &TextOptions::default());
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Asks for the page's coreferences and validates them, without touching
/// the dictionary. Bypassed sections return no decisions and make no calls.
pub fn extract_agent1_page(
    page_index: usize,
    page_text: &str,
    section: SectionKind,
    bold: &BTreeSet<String>,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &AgentConfig,
) -> Result<Vec<PairDecision>, AgentError> {
    if section.is_bypassed() || page_text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let Parsed::CorefMap(map) = ask(backend, &templates.coref_text, page_text, ExpectedShape::CorefMap, &[], cfg)?
    else {
        unreachable!("coref map shape")
    };
    Ok(decide_pairs(
        map,
        page_text,
        |label| bold.contains(&label.to_lowercase()),
        provenance(page_index, AgentId::Agent1, Modality::Text),
        cfg,
    ))
}

/// Extraction followed by an immediate commit into `dict`.
#[allow(clippy::too_many_arguments)]
pub fn run_agent1_page(
    page_index: usize,
    page_text: &str,
    section: SectionKind,
    bold: &BTreeSet<String>,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    dict: &SharedDictionary,
    cfg: &AgentConfig,
) -> Result<Vec<PairOutcome>, AgentError> {
    let decisions = extract_agent1_page(page_index, page_text, section, bold, backend, templates, cfg)?;
    Ok(commit(decisions, dict))
}

#[cfg(test)]
mod tests {
    use super::super::testing::Scripted;
    use super::super::{Counting, PairResult, RuleBackend};
    use super::*;
    use crate::coref::RejectReason;
    use crate::doc::PageBuilder;

    fn run(text: &str, section: SectionKind, backend: &dyn ExtractionBackend, dict: &SharedDictionary) -> Vec<PairOutcome> {
        let cfg = AgentConfig::default();
        run_agent1_page(0, text, section, &BTreeSet::new(), backend, &TemplateSet::default(), dict, &cfg).unwrap()
    }

    #[test]
    fn rule_backend_inserts_parenthesized_label() {
        let dict = SharedDictionary::default();
        let out = run("4-methylbenzaldehyde (1b) was added", SectionKind::Technical, &RuleBackend::default(), &dict);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].result, PairResult::Inserted);
        assert_eq!(dict.resolve("1b").unwrap().raw(), "4-methylbenzaldehyde");
        let entry = dict.snapshot().entry("1b").cloned().unwrap();
        assert_eq!(entry.context, "4-methylbenzaldehyde (1b) was added");
    }

    #[test]
    fn non_technical_page_makes_no_calls() {
        let b = Counting::new(RuleBackend::default());
        let dict = SharedDictionary::default();
        assert!(run("4-methylbenzaldehyde (1b)", SectionKind::NonTechnical, &b, &dict).is_empty());
        assert_eq!(b.calls(), 0);
        run("4-methylbenzaldehyde (1b)", SectionKind::Unknown, &b, &dict);
        assert_eq!(b.calls(), 1);
    }

    #[test]
    fn figure_reference_is_rejected() {
        let b = Scripted::new(&[r#"{"Figure 5a": "2-chloro-benzamide"}"#]);
        let dict = SharedDictionary::default();
        let out = run("As shown in Figure 5a, 2-chloro-benzamide reacts.", SectionKind::Technical, &b, &dict);
        assert_eq!(out[0].result, PairResult::Rejected { reason: RejectReason::PatternMismatch });
        assert!(dict.snapshot().is_empty());
    }

    #[test]
    fn anti_cue_label_is_rejected() {
        let b = Scripted::new(&[r#"{"5a": "2-chloro-benzamide"}"#]);
        let dict = SharedDictionary::default();
        let out = run("See Figure 5a for 2-chloro-benzamide.", SectionKind::Technical, &b, &dict);
        assert!(matches!(out[0].result, PairResult::Rejected { .. }));
        assert!(dict.snapshot().is_empty());
    }

    #[test]
    fn bold_words_are_collected() {
        let mut page = PageBuilder::new(0, 200.0, 100.0).text(10.0, 20.0, "plain 3a", 10.0, 6.0).build();
        for ch in page.blocks[0].lines[0].spans[0].chars.iter_mut().skip(5) {
            ch.bold = true;
        }
        assert_eq!(bold_tokens(&page), BTreeSet::from(["3a".to_string()]));
    }
}
