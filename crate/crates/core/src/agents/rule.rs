//! Deterministic pattern-based backend.
//!
//! Stands in for a language model in hermetic runs. It reads the task marker
//! from the prompt and applies fixed rules to the content:
//!
//! * coreferences: `<name> (<label>)` and `<label> = <name>`, where the name
//!   has at least eight characters and contains a digit or a hyphen;
//! * reactions: a sentence containing "yield" and "gave" or "afforded", with
//!   labels and digit-bearing chemical tokens before the verb as reactants,
//!   the first one after it as product, a lexicon solvent after "in", and the
//!   first percentage or range as yield; pipe-delimited tables with Product
//!   and Yield columns give one reaction per row;
//! * revisits: the first of the two contexts that defines the label wins.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::{json, Value};

use super::backend::{estimate_tokens, BackendError, ExtractionBackend};
use super::template::Task;
use crate::coref::{is_chemical_looking, matches_label_pattern, ANTI_CUES};

pub const SOLVENTS: [&str; 8] = ["THF", "DMF", "DMSO", "toluene", "dioxane", "MeCN", "EtOH", "water"];

const STOPWORDS: [&str; 40] = [
    "a", "an", "the", "of", "and", "or", "with", "to", "in", "on", "at", "by", "for", "from", "was", "were",
    "is", "are", "be", "been", "then", "mixture", "solution", "added", "using", "via", "as", "under", "into",
    "onto", "compound", "product", "gave", "afforded", "yield", "after", "that", "which", "while", "this",
];

const UNITS: [&str; 12] = ["h", "min", "mmol", "mol", "equiv", "equiv.", "°c", "ml", "g", "mg", "m", "%"];

#[derive(Clone, Debug)]
pub struct RuleBackend {
    context_limit: usize,
    chars_per_token: usize,
}

impl Default for RuleBackend {
    fn default() -> Self {
        Self {
            context_limit: 128_000,
            chars_per_token: 4,
        }
    }
}

impl RuleBackend {
    pub fn new(context_limit: usize, chars_per_token: usize) -> Self {
        Self {
            context_limit,
            chars_per_token,
        }
    }
}

impl ExtractionBackend for RuleBackend {
    fn submit(&self, prompt: &str, content: &str, _token_budget: usize) -> Result<String, BackendError> {
        let needed = estimate_tokens(prompt, self.chars_per_token) + estimate_tokens(content, self.chars_per_token);
        if needed > self.context_limit {
            return Err(BackendError::ContextOverflow {
                needed,
                limit: self.context_limit,
            });
        }
        let answer = match Task::from_marker(prompt) {
            Some(Task::CorefText | Task::CorefAsset) => {
                let map: serde_json::Map<String, Value> = coreferences(content)
                    .into_iter()
                    .map(|(k, v)| (k, Value::String(v)))
                    .collect();
                Value::Object(map)
            }
            Some(Task::Reactions) => Value::Array(reactions(content)),
            Some(Task::Revisit) => json!({ "molecule": revisit(content) }),
            None => return Ok("I cannot tell what task this is.".to_string()),
        };
        Ok(answer.to_string())
    }

    fn context_limit(&self) -> usize {
        self.context_limit
    }
}

fn strip(token: &str) -> &str {
    token
        .trim_start_matches(['(', '[', '"', '\''])
        .trim_end_matches([',', '.', ';', ':', ')', ']', '"'])
}

fn valid_name(name: &str) -> bool {
    name.chars().count() >= 8 && name.chars().any(|c| c.is_ascii_digit() || c == '-')
}

fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&strip(token).to_lowercase().as_str())
}

fn paren_label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\((\d{1,3}[a-z]{0,2})\)").expect("valid pattern"))
}

fn definition_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|[\s|(])(\d{1,3}[a-z]{0,2})\s*=\s*").expect("valid pattern"))
}

fn yield_in_text_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\d{1,3}(?:\.\d+)?\s*%?\s*[-–—]\s*\d{1,3}(?:\.\d+)?\s*%|\d{1,3}(?:\.\d+)?\s*%")
            .expect("valid pattern")
    })
}

/// Name ending right before byte `end`, extended backwards word by word.
fn name_before(text: &str, end: usize) -> Option<String> {
    let mut words: Vec<&str> = Vec::new();
    for w in text[..end].split_whitespace().rev().take(6) {
        if is_stopword(w) || w.ends_with([',', '.', ';', ':', ')']) || w.contains(['|', '=']) {
            break;
        }
        words.push(w);
    }
    words.reverse();
    let name = words.join(" ");
    valid_name(&name).then_some(name)
}

/// Name starting at byte `start`, extended forwards word by word.
fn name_after(text: &str, start: usize) -> Option<String> {
    let mut words: Vec<&str> = Vec::new();
    let rest = text[start..].split('\n').next().unwrap_or("");
    for w in rest.split_whitespace().take(6) {
        if is_stopword(w) || matches_label_pattern(strip(w)) || w.contains(['|', '=']) {
            break;
        }
        let ends = w.ends_with([',', ';', '.']);
        words.push(if ends { &w[..w.len() - 1] } else { w });
        if ends {
            break;
        }
    }
    let name = words.join(" ");
    valid_name(&name).then_some(name)
}

/// Label → name pairs in order of first appearance; the first definition of
/// a label wins.
pub fn coreferences(text: &str) -> Vec<(String, String)> {
    let mut found: Vec<(usize, String, String)> = Vec::new();
    for cap in paren_label_re().captures_iter(text) {
        let whole = cap.get(0).expect("match");
        if let Some(name) = name_before(text, whole.start()) {
            found.push((whole.start(), cap[1].to_string(), name));
        }
    }
    // Definitions are searched line by line so a table row never runs into
    // the next one.
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        for cap in definition_re().captures_iter(line) {
            let whole = cap.get(0).expect("match");
            if let Some(name) = name_after(line, whole.end()) {
                found.push((offset + whole.start(), cap[1].to_string(), name));
            }
        }
        offset += line.len();
    }
    found.sort_by_key(|f| f.0);
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (_, label, name) in found {
        if seen.insert(label.clone(), ()).is_none() {
            out.push((label, name));
        }
    }
    out
}

fn revisit(content: &str) -> String {
    let field = |key: &str| -> Option<&str> {
        content
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .map(str::trim)
    };
    let Some(label) = field("Label:") else {
        return String::new();
    };
    for key in ["Context A:", "Context B:"] {
        if let Some(ctx) = field(key) {
            if let Some((_, name)) = coreferences(ctx).into_iter().find(|(l, _)| l == label) {
                return name;
            }
        }
    }
    String::new()
}

/// Byte ranges of sentences in a prose segment.
pub(crate) fn sentences(text: &str) -> Vec<(usize, usize)> {
    const ABBREVIATIONS: [&str; 12] = [
        "fig.", "figs.", "eq.", "eqs.", "e.g.", "i.e.", "etc.", "ca.", "equiv.", "vs.", "al.", "ref.",
    ];
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let paragraph = c == b'\n' && text[i + 1..].starts_with('\n');
        let terminal = matches!(c, b'.' | b'!' | b'?')
            && text[i + 1..].chars().next().is_none_or(char::is_whitespace);
        if paragraph || terminal {
            let end = if terminal { i + 1 } else { i };
            let last_word = text[start..end].split_whitespace().next_back().unwrap_or("").to_lowercase();
            let next = text[end..].trim_start().chars().next();
            let abbreviation = terminal && ABBREVIATIONS.contains(&last_word.as_str());
            let continues = terminal && next.is_some_and(|n| n.is_lowercase());
            if paragraph || !(abbreviation || continues) {
                if !text[start..end].trim().is_empty() {
                    out.push(trim_range(text, start, end));
                }
                start = end;
            }
        }
        i += 1;
    }
    if !text[start..].trim().is_empty() {
        out.push(trim_range(text, start, text.len()));
    }
    out
}

fn trim_range(text: &str, start: usize, end: usize) -> (usize, usize) {
    let s = &text[start..end];
    let lead = s.len() - s.trim_start().len();
    let trail = s.len() - s.trim_end().len();
    (start + lead, end - trail)
}

fn is_reaction_species(tokens: &[&str], i: usize) -> bool {
    let t = strip(tokens[i]);
    if matches_label_pattern(t) {
        let prev = i.checked_sub(1).map(|p| tokens[p].to_lowercase());
        if prev.is_some_and(|p| ANTI_CUES.contains(&p.as_str()) || ANTI_CUES.contains(&strip(&p)) || p == "entry") {
            return false;
        }
        let bare_number = t.chars().all(|c| c.is_ascii_digit());
        let next = tokens.get(i + 1).map(|n| strip(n).to_lowercase());
        return !(bare_number && next.is_some_and(|n| UNITS.contains(&n.as_str())));
    }
    is_chemical_looking(t) && t.chars().any(|c| c.is_ascii_digit())
}

fn solvent_in(tokens: &[&str]) -> Option<&'static str> {
    tokens.windows(2).find_map(|w| {
        (w[0].eq_ignore_ascii_case("in"))
            .then(|| SOLVENTS.iter().find(|s| s.eq_ignore_ascii_case(strip(w[1]))))
            .flatten()
            .copied()
    })
}

fn sentence_reaction(sentence: &str) -> Option<Value> {
    if !sentence.to_lowercase().contains("yield") {
        return None;
    }
    let tokens: Vec<&str> = sentence.split_whitespace().collect();
    let verb = tokens
        .iter()
        .position(|t| matches!(strip(t).to_lowercase().as_str(), "gave" | "afforded"))?;
    let reactants: Vec<&str> = (0..verb)
        .filter(|&i| is_reaction_species(&tokens, i))
        .map(|i| strip(tokens[i]))
        .collect();
    let product = (verb + 1..tokens.len()).find(|&i| is_reaction_species(&tokens, i))?;
    let yield_text = yield_in_text_re().find(sentence).map(|m| m.as_str().to_string());
    Some(json!({
        "reactants": reactants,
        "catalyst": null,
        "solvent": solvent_in(&tokens),
        "products": [strip(tokens[product])],
        "yield": yield_text,
        "evidence": sentence,
    }))
}

fn split_species(cell: &str) -> Vec<String> {
    cell.split(['+', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Column {
    Reactant,
    Extra,
    Catalyst,
    Solvent,
    Product,
    Yield,
    Other,
}

fn column_role(header: &str) -> Column {
    let h = header.to_lowercase();
    if h.contains("product") {
        Column::Product
    } else if h.contains("yield") {
        Column::Yield
    } else if h.contains("reactant") || h.contains("substrate") || h.contains("starting") {
        Column::Reactant
    } else if h.contains("catalyst") {
        Column::Catalyst
    } else if h.contains("solvent") {
        Column::Solvent
    } else if h.contains("ligand") || h.contains("additive") || h.contains("base") {
        Column::Extra
    } else {
        Column::Other
    }
}

fn cells(line: &str) -> Vec<&str> {
    line.split('|').map(str::trim).collect()
}

fn table_reactions(lines: &[&str]) -> Vec<Value> {
    let Some((header, rows)) = lines.split_first() else {
        return Vec::new();
    };
    let roles: Vec<Column> = cells(header).into_iter().map(column_role).collect();
    if !roles.contains(&Column::Product) || !roles.contains(&Column::Yield) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for row in rows {
        let values = cells(row);
        if values.len() != roles.len() {
            continue;
        }
        let mut reactants = Vec::new();
        let mut extras = Vec::new();
        let (mut products, mut catalyst, mut solvent, mut yield_text) = (Vec::new(), None, None, None);
        for (role, v) in roles.iter().zip(&values) {
            if v.is_empty() {
                continue;
            }
            match role {
                Column::Reactant => reactants.extend(split_species(v)),
                Column::Extra => extras.extend(split_species(v)),
                Column::Catalyst => catalyst = Some(v.to_string()),
                Column::Solvent => solvent = Some(v.to_string()),
                Column::Product => products = split_species(v),
                Column::Yield => yield_text = super::parse::is_yield_text(v).then(|| v.to_string()),
                Column::Other => {}
            }
        }
        if products.is_empty() {
            continue;
        }
        reactants.extend(extras);
        out.push(json!({
            "reactants": reactants,
            "catalyst": catalyst,
            "solvent": solvent,
            "products": products,
            "yield": yield_text,
            "evidence": row.trim(),
        }));
    }
    out
}

/// Reactions in the order their evidence appears in `text`.
pub fn reactions(text: &str) -> Vec<Value> {
    let mut out = Vec::new();
    let lines: Vec<&str> = text.split('\n').collect();
    let mut prose = String::new();
    let mut i = 0;
    let flush = |prose: &mut String, out: &mut Vec<Value>| {
        for (s, e) in sentences(prose) {
            out.extend(sentence_reaction(&prose[s..e]));
        }
        prose.clear();
    };
    while i < lines.len() {
        if lines[i].contains(" | ") {
            flush(&mut prose, &mut out);
            let start = i;
            while i < lines.len() && lines[i].contains(" | ") {
                i += 1;
            }
            out.extend(table_reactions(&lines[start..i]));
        } else {
            prose.push_str(lines[i]);
            prose.push('\n');
            i += 1;
        }
    }
    flush(&mut prose, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paren_and_definition_rules() {
        let text = "A mixture of 4-methylbenzaldehyde (1b) was stirred.\nThen methyl 4'-methylbiphenyl-4-carboxylate (3b) was isolated.\n2d = methyl 4-iodobenzoate";
        assert_eq!(
            coreferences(text),
            [
                ("1b".to_string(), "4-methylbenzaldehyde".to_string()),
                ("3b".into(), "methyl 4'-methylbiphenyl-4-carboxylate".into()),
                ("2d".into(), "methyl 4-iodobenzoate".into()),
            ]
        );
    }

    #[test]
    fn short_or_plain_names_are_ignored() {
        assert!(coreferences("the mixture (1b) was stirred").is_empty());
        assert!(coreferences("Amphos (3) was used").is_empty());
    }

    #[test]
    fn definitions_stop_at_next_label() {
        let pairs = coreferences("2d = methyl 4-iodobenzoate 1b = 4-methylbenzoic acid");
        assert_eq!(pairs[0].1, "methyl 4-iodobenzoate");
        assert_eq!(pairs[1], ("1b".to_string(), "4-methylbenzoic acid".to_string()));
    }

    #[test]
    fn fixture_sentence_reaction() {
        let r = reactions("1b and 2d gave 3b in 93% yield in THF");
        assert_eq!(
            r,
            [json!({
                "reactants": ["1b", "2d"],
                "catalyst": null,
                "solvent": "THF",
                "products": ["3b"],
                "yield": "93%",
                "evidence": "1b and 2d gave 3b in 93% yield in THF",
            })]
        );
    }

    #[test]
    fn sentence_without_verb_is_ignored() {
        assert!(reactions("3b was obtained in 93% yield.").is_empty());
    }

    #[test]
    fn table_rows_become_reactions() {
        let text = "Entry | Reactants | Ligand | Solvent | Product | Yield\n3 | 1b + 2d | Amphos | THF | 3b | 93%\n";
        let r = reactions(text);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0]["reactants"], json!(["1b", "2d", "Amphos"]));
        assert_eq!(r[0]["solvent"], "THF");
        assert_eq!(r[0]["yield"], "93%");
    }

    #[test]
    fn sentence_splitting_respects_abbreviations() {
        let text = "See Fig. 2 for details. Then 1b gave 3b.\n\nNext paragraph";
        let parts: Vec<&str> = sentences(text).into_iter().map(|(s, e)| &text[s..e]).collect();
        assert_eq!(parts, ["See Fig. 2 for details.", "Then 1b gave 3b.", "Next paragraph"]);
    }

    #[test]
    fn unknown_task_gets_prose() {
        let out = RuleBackend::default().submit("hello", "x", 10).unwrap();
        assert!(!out.contains('{'));
    }

    #[test]
    fn oversized_request_overflows() {
        let b = RuleBackend::new(10, 4);
        let err = b.submit("[task:reactions]", &"x".repeat(100), 10).unwrap_err();
        assert!(matches!(err, BackendError::ContextOverflow { .. }));
    }

    #[test]
    fn revisit_prefers_first_defining_context() {
        let content = "Label: 1b\nCandidate A: 4-methylbenzaldehyde\nContext A: A mixture of 4-methylbenzaldehyde (1b) was stirred.\nCandidate B: 4-methylbenzoic acid\nContext B: 1b = 4-methylbenzoic acid";
        assert_eq!(revisit(content), "4-methylbenzaldehyde");
    }
}
