//! Extraction agents and the backends they talk to.
//!
//! Agent I reads page text, Agent II reads tables and figures, and both feed
//! the coreference dictionary. Agent III reads the whole document and
//! returns raw reactions. Each agent is split into a pure extraction step,
//! which may run on a worker pool, and a cheap sequential commit.

mod agent1;
mod agent2;
mod agent3;
mod backend;
mod parse;
mod remote;
mod rule;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent1::{bold_tokens, extract_agent1_page, run_agent1_page};
pub use agent2::{extract_agent2_assets, extract_figure, extract_table, run_agent2_assets};
pub use agent3::{chunk_ranges, merge_reactions, run_agent3_document, Agent3Output, ChunkFailure, DocText};
pub use backend::{estimate_tokens, Attachment, BackendError, Counting, ExtractionBackend, RateLimited};
pub use parse::{is_yield_text, parse_backend_response, ExpectedShape, ParseError, Parsed, RawReaction, SourceSpan};
pub use remote::{RemoteBackend, RemoteConfig, ENV_KEY, ENV_MODEL, ENV_URL};
pub use rule::{RuleBackend, SOLVENTS};
pub use template::{FewShot, PromptTemplate, Task, TemplateError, TemplateSet};

use crate::coref::{
    validate_label_styled, AgentId, Conflict, CorefEntry, CorefLabel, InsertOutcome, Modality, MoleculeName,
    Provenance, RejectReason, SharedDictionary,
};

/// Appended to the prompt when the first answer did not parse.
pub const JSON_ONLY_SUFFIX: &str = "Respond with JSON only.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Characters per token for budget estimates.
    pub chars_per_token: usize,
    /// Overlap between consecutive Agent III chunks.
    pub chunk_overlap_tokens: usize,
    /// Tokens reserved for the answer; also passed as the token budget.
    pub response_tokens: usize,
    /// Characters kept on each side of a label when storing its context.
    pub context_chars: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            chars_per_token: 4,
            chunk_overlap_tokens: 512,
            response_tokens: 2048,
            context_chars: 100,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("unparseable answer after retry: {0}")]
    Parse(#[from] ParseError),
}

impl AgentError {
    /// Transport problems may go away on a later run; parse failures will not.
    pub fn is_retriable(&self) -> bool {
        matches!(self, AgentError::Backend(_))
    }
}

/// One request with a single retry on unparseable output.
pub fn ask(
    backend: &dyn ExtractionBackend,
    template: &PromptTemplate,
    content: &str,
    shape: ExpectedShape,
    attachments: &[Attachment],
    cfg: &AgentConfig,
) -> Result<Parsed, AgentError> {
    let prompt = template.render();
    let send = |p: &str| {
        if attachments.is_empty() {
            backend.submit(p, content, cfg.response_tokens)
        } else {
            backend.submit_with_attachments(p, content, cfg.response_tokens, attachments)
        }
    };
    match parse_backend_response(&send(&prompt)?, shape) {
        Ok(parsed) => Ok(parsed),
        Err(first) => {
            log::debug!("retrying {} after parse error: {first}", template.name);
            let retry = format!("{prompt}{JSON_ONLY_SUFFIX}\n");
            Ok(parse_backend_response(&send(&retry)?, shape)?)
        }
    }
}

/// What happened to one label → molecule pair proposed by a backend.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum PairResult {
    Inserted,
    Duplicate,
    Conflict,
    Rejected { reason: RejectReason },
    /// The molecule name was empty.
    InvalidMolecule,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub label: String,
    pub molecule: String,
    #[serde(flatten)]
    pub result: PairResult,
}

/// A validated pair waiting to be inserted, or the reason it will not be.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PairDecision {
    Accept(CorefEntry),
    Reject { label: String, molecule: String, result: PairResult },
}

/// Validates proposed pairs against their source text.
pub(crate) fn decide_pairs(
    pairs: impl IntoIterator<Item = (String, String)>,
    context: &str,
    is_bold: impl Fn(&str) -> bool,
    provenance: Provenance,
    cfg: &AgentConfig,
) -> Vec<PairDecision> {
    pairs
        .into_iter()
        .map(|(label, molecule)| {
            let verdict = validate_label_styled(&label, context, is_bold(&label));
            if let crate::coref::LabelVerdict::Reject(reason) = verdict {
                return PairDecision::Reject {
                    label,
                    molecule,
                    result: PairResult::Rejected { reason },
                };
            }
            let (Some(l), Some(m)) = (CorefLabel::new(&label), MoleculeName::new(molecule.clone())) else {
                return PairDecision::Reject {
                    label,
                    molecule,
                    result: PairResult::InvalidMolecule,
                };
            };
            PairDecision::Accept(CorefEntry {
                context: snippet(context, &label, cfg.context_chars),
                label: l,
                molecule: m,
                provenance,
            })
        })
        .collect()
}

/// Inserts accepted pairs in order and reports every decision.
pub fn commit(decisions: Vec<PairDecision>, dict: &SharedDictionary) -> Vec<PairOutcome> {
    decisions
        .into_iter()
        .map(|d| match d {
            PairDecision::Accept(entry) => {
                let label = entry.label.to_string();
                let molecule = entry.molecule.raw().to_string();
                let result = match dict.insert(entry) {
                    InsertOutcome::Inserted => PairResult::Inserted,
                    InsertOutcome::Duplicate => PairResult::Duplicate,
                    InsertOutcome::Conflict => PairResult::Conflict,
                };
                PairOutcome { label, molecule, result }
            }
            PairDecision::Reject { label, molecule, result } => PairOutcome { label, molecule, result },
        })
        .collect()
}

fn floor_boundary(text: &str, mut i: usize) -> usize {
    while !text.is_char_boundary(i) {
        i -= 1;
    }
    i
}

fn ceil_boundary(text: &str, mut i: usize) -> usize {
    while !text.is_char_boundary(i) {
        i += 1;
    }
    i
}

/// Text around the first whole-token occurrence of `label`.
pub(crate) fn snippet(text: &str, label: &str, radius: usize) -> String {
    let at = crate::coref::occurrences(text, label).first().copied().unwrap_or(0);
    let start = floor_boundary(text, at.saturating_sub(radius));
    let end = ceil_boundary(text, (at + label.len() + radius).min(text.len()));
    text[start..end].split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Content of a revisit question for the backend.
pub fn revisit_content(conflict: &Conflict) -> String {
    format!(
        "Label: {}\nCandidate A: {}\nContext A: {}\nCandidate B: {}\nContext B: {}\n",
        conflict.label,
        conflict.existing.molecule.raw(),
        conflict.existing.context,
        conflict.incoming.molecule.raw(),
        conflict.incoming.context,
    )
}

/// Asks the backend which molecule a conflicting label stands for.
pub fn ask_revisit(
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    conflict: &Conflict,
    cfg: &AgentConfig,
) -> Result<String, AgentError> {
    match ask(backend, &templates.revisit, &revisit_content(conflict), ExpectedShape::Answer, &[], cfg)? {
        Parsed::Answer(a) => Ok(a),
        _ => unreachable!("answer shape"),
    }
}

pub(crate) fn provenance(page_index: usize, agent_id: AgentId, modality: Modality) -> Provenance {
    Provenance {
        page_index,
        agent_id,
        modality,
    }
}


#[cfg(test)]
mod tests {
    use super::testing::Scripted;
    use super::*;

    #[test]
    fn retry_appends_json_only_suffix() {
        let b = Scripted::new(&["no idea", r#"{"1b": "4-methylbenzaldehyde"}"#]);
        let t = PromptTemplate::builtin(Task::CorefText);
        let got = ask(&b, &t, "x", ExpectedShape::CorefMap, &[], &AgentConfig::default()).unwrap();
        assert!(matches!(got, Parsed::CorefMap(m) if m.len() == 1));
        let prompts = b.prompts.lock().unwrap();
        assert_eq!(prompts.len(), 2);
        assert!(prompts[1].ends_with("Respond with JSON only.\n"));
    }

    #[test]
    fn second_parse_failure_is_terminal() {
        let b = Scripted::new(&["nope"]);
        let t = PromptTemplate::builtin(Task::CorefText);
        let err = ask(&b, &t, "x", ExpectedShape::CorefMap, &[], &AgentConfig::default()).unwrap_err();
        assert!(matches!(err, AgentError::Parse(_)));
        assert!(!err.is_retriable());
        assert_eq!(b.prompts.lock().unwrap().len(), 2);
    }

    #[test]
    fn snippet_is_centered_on_label() {
        let text = format!("{}4-methylbenzaldehyde (1b) was added{}", "x ".repeat(200), " y".repeat(200));
        let s = snippet(&text, "1b", 30);
        assert!(s.contains("(1b)"));
        assert!(s.len() <= 70);
    }

    pub(crate) fn entry(label: &str, molecule: &str, page: usize) -> CorefEntry {
        CorefEntry {
            label: CorefLabel::new(label).unwrap(),
            molecule: MoleculeName::new(molecule).unwrap(),
            provenance: provenance(page, AgentId::Agent1, Modality::Text),
            context: String::new(),
        }
    }

    #[test]
    fn revisit_content_lists_both_candidates() {
        let dict = SharedDictionary::default();
        let mut a = entry("1b", "4-methylbenzaldehyde", 1);
        a.context = "4-methylbenzaldehyde (1b)".into();
        dict.insert(a);
        dict.insert(entry("1b", "4-methylbenzoic acid", 2));
        let c = dict.snapshot().revisit_queue()[0].clone();
        let content = revisit_content(&c);
        assert!(content.starts_with("Label: 1b\nCandidate A: 4-methylbenzaldehyde\n"));
        let answer = ask_revisit(&RuleBackend::default(), &TemplateSet::default(), &c, &AgentConfig::default());
        assert_eq!(answer.unwrap(), "4-methylbenzaldehyde");
    }
}
