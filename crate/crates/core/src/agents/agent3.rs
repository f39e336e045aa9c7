use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    ask, estimate_tokens, AgentConfig, ExpectedShape, ExtractionBackend, Parsed, RawReaction, SourceSpan,
    TemplateSet, JSON_ONLY_SUFFIX,
};
use crate::coref::{normalize_name, occurrences};

/// The whole document as one string, with page starts recorded so that
/// byte offsets can be traced back to pages.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocText {
    pub text: String,
    /// `(page_index, byte offset)` for every page, in order.
    pub page_starts: Vec<(usize, usize)>,
}

impl DocText {
    /// Appends a page: its body text, then each table as a `[Table]` marker
    /// followed by pipe-delimited rows.
    pub fn push_page(&mut self, page_index: usize, body: &str, tables: &[String]) {
        if !self.text.is_empty() {
            self.text.push_str("\n\n");
        }
        self.page_starts.push((page_index, self.text.len()));
        self.text.push_str(body.trim_end());
        for t in tables {
            if !self.text.is_empty() {
                self.text.push_str("\n\n");
            }
            self.text.push_str("[Table]\n");
            self.text.push_str(t.trim_end());
        }
    }

    pub fn page_at(&self, offset: usize) -> usize {
        self.page_starts
            .iter()
            .take_while(|(_, start)| *start <= offset)
            .last()
            .map_or(0, |(p, _)| *p)
    }
}

fn tokens(text: &str, range: (usize, usize), cpt: usize) -> usize {
    estimate_tokens(&text[range.0..range.1], cpt)
}

/// Splits `range` at `sep`, keeping separators attached to the left piece.
fn split_range(text: &str, range: (usize, usize), sep: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = range.0;
    for (i, _) in text[range.0..range.1].match_indices(sep) {
        let end = range.0 + i + sep.len();
        if end > start {
            out.push((start, end));
            start = end;
        }
    }
    if start < range.1 {
        out.push((start, range.1));
    }
    out
}

/// Cuts an oversized range into pieces of at most `max_chars` characters.
fn hard_split(text: &str, range: (usize, usize), max_chars: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = range.0;
    let mut count = 0;
    for (i, _) in text[range.0..range.1].char_indices() {
        if count == max_chars {
            out.push((start, range.0 + i));
            start = range.0 + i;
            count = 0;
        }
        count += 1;
    }
    out.push((start, range.1));
    out
}

/// Paragraphs, then lines, then raw character runs: the coarsest pieces
/// that each fit into `max_tokens`.
fn pieces(text: &str, max_tokens: usize, cpt: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for para in split_range(text, (0, text.len()), "\n\n") {
        if tokens(text, para, cpt) <= max_tokens {
            out.push(para);
            continue;
        }
        for line in split_range(text, para, "\n") {
            if tokens(text, line, cpt) <= max_tokens {
                out.push(line);
            } else {
                out.extend(hard_split(text, line, max_tokens * cpt.max(1)));
            }
        }
    }
    out
}

/// Byte ranges of the chunks `text` is sent in. Chunks break at paragraph
/// boundaries where possible; consecutive chunks share up to
/// `overlap_tokens` worth of trailing paragraphs.
pub fn chunk_ranges(text: &str, max_tokens: usize, overlap_tokens: usize, cpt: usize) -> Vec<(usize, usize)> {
    let max_tokens = max_tokens.max(1);
    if text.is_empty() {
        return Vec::new();
    }
    if estimate_tokens(text, cpt) <= max_tokens {
        return vec![(0, text.len())];
    }
    let overlap = overlap_tokens.min(max_tokens / 2);
    let p = pieces(text, max_tokens, cpt);
    let fits = |a: usize, b: usize, limit: usize| tokens(text, (p[a].0, p[b].1), cpt) <= limit;
    let mut out = Vec::new();
    let mut s = 0;
    loop {
        let mut e = s;
        while e + 1 < p.len() && fits(s, e + 1, max_tokens) {
            e += 1;
        }
        out.push((p[s].0, p[e].1));
        if e + 1 >= p.len() {
            break;
        }
        let mut k = e + 1;
        while k - 1 > s && fits(k - 1, e, overlap) && fits(k - 1, e + 1, max_tokens) {
            k -= 1;
        }
        s = k;
    }
    out
}

fn merge_key(r: &RawReaction) -> (BTreeSet<String>, Option<String>) {
    (
        r.products.iter().map(|p| normalize_name(p)).collect(),
        r.yield_text.as_ref().map(|y| y.split_whitespace().collect()),
    )
}

/// Merges reactions sharing a product set and yield, keeping first
/// appearance order. Lists are unioned and the first non-empty optional
/// field wins.
pub fn merge_reactions(reactions: Vec<RawReaction>) -> Vec<RawReaction> {
    let mut out: Vec<RawReaction> = Vec::new();
    for r in reactions {
        let key = merge_key(&r);
        let Some(into) = out.iter_mut().find(|o| merge_key(o) == key) else {
            out.push(r);
            continue;
        };
        for reactant in r.reactants {
            let n = normalize_name(&reactant);
            if !into.reactants.iter().any(|x| normalize_name(x) == n) {
                into.reactants.push(reactant);
            }
        }
        into.catalyst = into.catalyst.take().or(r.catalyst);
        into.solvent = into.solvent.take().or(r.solvent);
        into.evidence = into.evidence.take().or(r.evidence);
        for span in r.source_spans {
            if !into.source_spans.contains(&span) {
                into.source_spans.push(span);
            }
        }
    }
    out
}

/// Locates a reaction inside its chunk: the quoted evidence if the backend
/// gave one, else the first product mention.
fn locate(doc: &DocText, chunk: (usize, usize), r: &RawReaction) -> Option<SourceSpan> {
    let text = &doc.text[chunk.0..chunk.1];
    let (start, len) = r
        .evidence
        .as_deref()
        .and_then(|e| text.find(e).map(|at| (at, e.len())))
        .or_else(|| {
            let p = r.products.first()?;
            occurrences(text, p).first().map(|&at| (at, p.len()))
        })?;
    let start = chunk.0 + start;
    Some(SourceSpan {
        page: doc.page_at(start),
        start,
        end: start + len,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkFailure {
    pub chunk: usize,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent3Output {
    pub reactions: Vec<RawReaction>,
    pub chunks: usize,
    pub failures: Vec<ChunkFailure>,
}

/// Sends the document, chunked if it does not fit the backend window, and
/// merges what comes back. Chunks run in order so the merge is stable; a
/// failed chunk only loses its own reactions.
pub fn run_agent3_document(
    doc: &DocText,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &AgentConfig,
) -> Agent3Output {
    if doc.text.trim().is_empty() {
        return Agent3Output::default();
    }
    let prompt = format!("{}{JSON_ONLY_SUFFIX}\n", templates.reactions.render());
    let room = backend
        .context_limit()
        .saturating_sub(estimate_tokens(&prompt, cfg.chars_per_token))
        .saturating_sub(cfg.response_tokens);
    let ranges = chunk_ranges(&doc.text, room, cfg.chunk_overlap_tokens, cfg.chars_per_token);
    let mut all = Vec::new();
    let mut failures = Vec::new();
    for (i, &range) in ranges.iter().enumerate() {
        let chunk = &doc.text[range.0..range.1];
        match ask(backend, &templates.reactions, chunk, ExpectedShape::ReactionList, &[], cfg) {
            Ok(Parsed::Reactions(list)) => {
                for mut r in list {
                    r.source_spans = locate(doc, range, &r).into_iter().collect();
                    all.push(r);
                }
            }
            Ok(_) => unreachable!("reaction list shape"),
            Err(e) => {
                log::warn!("chunk {i} dropped: {e}");
                failures.push(ChunkFailure {
                    chunk: i,
                    error: e.to_string(),
                });
            }
        }
    }
    Agent3Output {
        reactions: merge_reactions(all),
        chunks: ranges.len(),
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Counting, RuleBackend};
    use super::*;

    fn raw(products: &[&str], yield_text: Option<&str>, solvent: Option<&str>) -> RawReaction {
        RawReaction {
            products: products.iter().map(|s| s.to_string()).collect(),
            yield_text: yield_text.map(String::from),
            solvent: solvent.map(String::from),
            ..Default::default()
        }
    }

    #[test]
    fn fixture_sentence_gives_one_reaction() {
        let mut doc = DocText::default();
        doc.push_page(0, "1b and 2d gave 3b in 93% yield in THF", &[]);
        let out = run_agent3_document(&doc, &RuleBackend::default(), &TemplateSet::default(), &AgentConfig::default());
        assert_eq!(out.reactions.len(), 1);
        let r = &out.reactions[0];
        assert_eq!(r.reactants, ["1b", "2d"]);
        assert_eq!(r.solvent.as_deref(), Some("THF"));
        assert_eq!(r.products, ["3b"]);
        assert_eq!(r.yield_text.as_deref(), Some("93%"));
        assert_eq!(r.source_spans, [SourceSpan { page: 0, start: 0, end: doc.text.len() }]);
    }

    #[test]
    fn empty_document_makes_no_calls() {
        let b = Counting::new(RuleBackend::default());
        let out = run_agent3_document(&DocText::default(), &b, &TemplateSet::default(), &AgentConfig::default());
        assert!(out.reactions.is_empty());
        assert_eq!(b.calls(), 0);
    }

    /// Oracle: a field-wise union of the two records written out by hand.
    #[test]
    fn split_reaction_merges_with_solvent() {
        let merged = merge_reactions(vec![raw(&["3b"], Some("93%"), None), raw(&["3B"], Some("93 %"), Some("THF"))]);
        assert_eq!(merged, [raw(&["3b"], Some("93%"), Some("THF"))]);
    }

    #[test]
    fn different_yields_stay_apart() {
        let merged = merge_reactions(vec![raw(&["3b"], Some("93%"), None), raw(&["3b"], Some("41%"), None)]);
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn chunks_cover_text_and_respect_limit() {
        let text: String = (0..40).map(|i| format!("Paragraph {i} with some words.\n\n")).collect();
        let ranges = chunk_ranges(&text, 30, 10, 4);
        assert!(ranges.len() > 1);
        assert_eq!(ranges[0].0, 0);
        assert_eq!(ranges.last().unwrap().1, text.len());
        for w in ranges.windows(2) {
            assert!(w[1].0 <= w[0].1, "gap between chunks");
            assert!(w[1].0 > w[0].0, "no progress");
        }
        for r in &ranges {
            assert!(estimate_tokens(&text[r.0..r.1], 4) <= 30);
        }
    }

    #[test]
    fn oversized_paragraph_is_split_hard() {
        let text = "x".repeat(1000);
        let ranges = chunk_ranges(&text, 10, 0, 4);
        assert_eq!(ranges.len(), 25);
    }

    #[test]
    fn chunked_and_whole_runs_agree() {
        let mut doc = DocText::default();
        let body: String = (0..30)
            .map(|i| format!("Filler paragraph number {i} about nothing in particular.\n\n1a and 2a gave {}a in {}% yield in THF.\n\n", 100 + i, 50 + i))
            .collect();
        doc.push_page(0, &body, &[]);
        let cfg = AgentConfig { chunk_overlap_tokens: 40, ..Default::default() };
        let whole = run_agent3_document(&doc, &RuleBackend::default(), &TemplateSet::default(), &cfg);
        let small = RuleBackend::new(estimate_tokens(&TemplateSet::default().reactions.render(), 4) + cfg.response_tokens + 200, 4);
        let chunked = run_agent3_document(&doc, &small, &TemplateSet::default(), &cfg);
        assert_eq!(whole.chunks, 1);
        assert!(chunked.chunks > 1);
        assert!(chunked.failures.is_empty());
        assert_eq!(whole.reactions.len(), 30);
        assert_eq!(chunked.reactions, whole.reactions);
    }

    #[test]
    fn page_lookup_by_offset() {
        let mut doc = DocText::default();
        doc.push_page(0, "first", &[]);
        doc.push_page(3, "second", &["a | b\n".into()]);
        assert_eq!(doc.page_at(0), 0);
        assert_eq!(doc.page_at(7), 3);
        assert!(doc.text.ends_with("second\n\n[Table]\na | b"));
    }
}
