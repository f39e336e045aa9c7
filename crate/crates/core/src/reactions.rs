//! Coreference substitution and the emitted reaction record format.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::RawReaction;
use crate::coref::{matches_label_pattern, CorefDictionary, MoleculeName};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub paper_id: String,
    /// 1-based, sequential within the paper.
    pub reaction_id: usize,
    pub reactants: Vec<MoleculeName>,
    pub catalyst: Option<MoleculeName>,
    pub solvent: Option<MoleculeName>,
    pub products: Vec<MoleculeName>,
    #[serde(rename = "yield")]
    pub yield_text: Option<String>,
    pub unresolved_labels: Vec<String>,
}

struct Substituter<'a> {
    dict: &'a CorefDictionary,
    unresolved: Vec<String>,
}

impl Substituter<'_> {
    fn name(&mut self, token: &str) -> Option<MoleculeName> {
        let token = token.trim();
        if matches_label_pattern(token) {
            if let Some(m) = self.dict.resolve(token) {
                return Some(m.clone());
            }
            if !self.unresolved.iter().any(|u| u == token) {
                self.unresolved.push(token.to_string());
            }
        }
        MoleculeName::new(token)
    }

    fn list(&mut self, tokens: &[String]) -> Vec<MoleculeName> {
        tokens.iter().filter_map(|t| self.name(t)).collect()
    }
}

/// Replaces every label-shaped field value that the dictionary resolves by
/// the molecule's raw name. Labels that do not resolve, tombstoned ones
/// included, stay as they are and are listed in `unresolved_labels`.
pub fn substitute(raw: &RawReaction, dict: &CorefDictionary, paper_id: &str, reaction_id: usize) -> ReactionRecord {
    let mut s = Substituter {
        dict,
        unresolved: Vec::new(),
    };
    let reactants = s.list(&raw.reactants);
    let catalyst = raw.catalyst.as_deref().and_then(|c| s.name(c));
    let solvent = raw.solvent.as_deref().and_then(|c| s.name(c));
    let products = s.list(&raw.products);
    ReactionRecord {
        paper_id: paper_id.to_string(),
        reaction_id,
        reactants,
        catalyst,
        solvent,
        products,
        yield_text: raw.yield_text.clone(),
        unresolved_labels: s.unresolved,
    }
}

/// Substitutes a whole paper's reactions, numbering them from 1.
pub fn substitute_all(raws: &[RawReaction], dict: &CorefDictionary, paper_id: &str) -> Vec<ReactionRecord> {
    raws.iter()
        .enumerate()
        .map(|(i, r)| substitute(r, dict, paper_id, i + 1))
        .collect()
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Pretty, key-sorted, newline-terminated JSON. Equal inputs give equal bytes.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = sort_keys(serde_json::to_value(value).expect("serializable"));
    let mut out = serde_json::to_string_pretty(&v).expect("serializable");
    out.push('\n');
    out
}

pub fn emit(records: &[ReactionRecord], out_path: &Path) -> io::Result<()> {
    std::fs::write(out_path, to_canonical_json(records))
}

pub fn load(path: &Path) -> io::Result<Vec<ReactionRecord>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coref::{AgentId, CorefEntry, CorefLabel, Modality, Provenance};

    fn dict(pairs: &[(&str, &str)]) -> CorefDictionary {
        let mut d = CorefDictionary::new();
        for (l, m) in pairs {
            d.insert(CorefEntry {
                label: CorefLabel::new(l).unwrap(),
                molecule: MoleculeName::new(*m).unwrap(),
                provenance: Provenance {
                    page_index: 0,
                    agent_id: AgentId::Agent1,
                    modality: Modality::Text,
                },
                context: String::new(),
            });
        }
        d
    }

    fn raw(reactants: &[&str], products: &[&str]) -> RawReaction {
        RawReaction {
            reactants: reactants.iter().map(|s| s.to_string()).collect(),
            products: products.iter().map(|s| s.to_string()).collect(),
            yield_text: Some("93%".into()),
            ..Default::default()
        }
    }

    fn names(v: &[MoleculeName]) -> Vec<&str> {
        v.iter().map(MoleculeName::raw).collect()
    }

    #[test]
    fn teaser_reactants_resolve_and_ligand_passes() {
        let d = dict(&[("1b", "4-methylbenzaldehyde"), ("2d", "methyl 4-iodobenzoate")]);
        let r = substitute(&raw(&["1b", "2d", "Amphos"], &["3b"]), &d, "p", 1);
        assert_eq!(names(&r.reactants), ["4-methylbenzaldehyde", "methyl 4-iodobenzoate", "Amphos"]);
        assert_eq!(r.unresolved_labels, ["3b"]);
    }

    #[test]
    fn missing_label_is_kept_and_listed() {
        let r = substitute(&raw(&["9z"], &["x-product-1"]), &CorefDictionary::new(), "p", 1);
        assert_eq!(names(&r.reactants), ["9z"]);
        assert_eq!(r.unresolved_labels, ["9z"]);
    }

    #[test]
    fn label_free_record_is_unchanged() {
        let input = raw(&["benzene-1,2-diol"], &["catechol-x"]);
        let r = substitute(&input, &CorefDictionary::new(), "p", 4);
        assert_eq!(names(&r.reactants), input.reactants);
        assert_eq!(names(&r.products), input.products);
        assert_eq!(r.yield_text, input.yield_text);
        assert!(r.unresolved_labels.is_empty());
    }

    #[test]
    fn empty_emit_is_brackets() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        emit(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "[]\n");
    }

    #[test]
    fn record_has_exactly_the_schema_keys() {
        let r = substitute(&raw(&["1b"], &["3b"]), &CorefDictionary::new(), "p", 1);
        let v: Value = serde_json::from_str(&to_canonical_json(&[r])).unwrap();
        let keys: Vec<&String> = v[0].as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            ["catalyst", "paper_id", "products", "reactants", "reaction_id", "solvent", "unresolved_labels", "yield"]
        );
    }

    #[test]
    fn emit_load_round_trip_and_bytes_repeat() {
        let d = dict(&[("1b", "4-methylbenzaldehyde")]);
        let recs = substitute_all(&[raw(&["1b"], &["3b"]), raw(&["2d"], &["3c"])], &d, "paper");
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        emit(&recs, &a).unwrap();
        emit(&recs, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(load(&a).unwrap(), recs);
        assert_eq!(recs[1].reaction_id, 2);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        assert!(emit(&[], Path::new("/nonexistent-dir/x/y.json")).is_err());
    }
}
