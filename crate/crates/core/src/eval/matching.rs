use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::{Exact, FieldCounts};
use crate::coref::normalize_name;
use crate::reactions::ReactionRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Yield,
    Reactant,
    Solvent,
    Product,
    Catalyst,
}

impl Field {
    /// The four scored fields, in published table order.
    pub const SCORED: [Field; 4] = [Field::Yield, Field::Reactant, Field::Solvent, Field::Product];

    pub fn label(self) -> &'static str {
        match self {
            Field::Yield => "Yield",
            Field::Reactant => "Reactant",
            Field::Solvent => "Solvent",
            Field::Product => "Product",
            Field::Catalyst => "Catalyst",
        }
    }
}

/// An annotated reaction. Fields missing from `annotated` count as
/// annotated; `false` removes the field from that field's total.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruthRecord {
    pub paper_id: String,
    pub reaction_id: usize,
    pub reactants: Vec<String>,
    pub catalyst: Option<String>,
    pub solvent: Option<String>,
    pub products: Vec<String>,
    #[serde(rename = "yield")]
    pub yield_text: Option<String>,
    pub unresolved_labels: Vec<String>,
    pub annotated: BTreeMap<Field, bool>,
}

impl GroundTruthRecord {
    pub fn is_annotated(&self, f: Field) -> bool {
        self.annotated.get(&f).copied().unwrap_or(true)
    }
}

/// Field values reduced to what equality is judged on.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Value {
    Set(BTreeSet<String>),
    Text(Option<String>),
}

impl Value {
    fn populated(&self) -> bool {
        match self {
            Value::Set(s) => !s.is_empty(),
            Value::Text(t) => t.is_some(),
        }
    }
}

pub fn normalize_yield(y: &str) -> String {
    y.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '％' => '%',
            '–' | '—' | '−' | '‐' => '-',
            c => c,
        })
        .collect()
}

fn names<'a>(items: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    items.into_iter().map(normalize_name).filter(|n| !n.is_empty()).collect()
}

fn opt_name(v: Option<&str>) -> Value {
    Value::Text(v.map(normalize_name).filter(|n| !n.is_empty()))
}

fn extracted_value(r: &ReactionRecord, f: Field) -> Value {
    match f {
        Field::Yield => Value::Text(r.yield_text.as_deref().map(normalize_yield)),
        Field::Reactant => Value::Set(names(r.reactants.iter().map(|m| m.raw()))),
        Field::Solvent => opt_name(r.solvent.as_ref().map(|m| m.raw())),
        Field::Product => Value::Set(names(r.products.iter().map(|m| m.raw()))),
        Field::Catalyst => opt_name(r.catalyst.as_ref().map(|m| m.raw())),
    }
}

fn truth_value(r: &GroundTruthRecord, f: Field) -> Value {
    match f {
        Field::Yield => Value::Text(r.yield_text.as_deref().map(normalize_yield)),
        Field::Reactant => Value::Set(names(r.reactants.iter().map(String::as_str))),
        Field::Solvent => opt_name(r.solvent.as_deref()),
        Field::Product => Value::Set(names(r.products.iter().map(String::as_str))),
        Field::Catalyst => opt_name(r.catalyst.as_deref()),
    }
}

/// Jaccard overlap of the normalized product sets.
pub fn similarity(e: &ReactionRecord, t: &GroundTruthRecord) -> Exact {
    let a = names(e.products.iter().map(|m| m.raw()));
    let b = names(t.products.iter().map(String::as_str));
    let union = a.union(&b).count();
    if union == 0 {
        return Exact::from_integer(0);
    }
    Exact::new(a.intersection(&b).count() as u128, union as u128)
}

fn same_yield(e: &ReactionRecord, t: &GroundTruthRecord) -> bool {
    extracted_value(e, Field::Yield) == truth_value(t, Field::Yield)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub extracted: usize,
    pub truth: usize,
    /// Exact similarity as "n/d".
    pub similarity: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<MatchPair>,
    pub unmatched_extracted: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
}

/// Greedy one-to-one matching: highest similarity first, ties broken by
/// yield agreement, then by input order. Zero similarity never matches.
pub fn match_records(extracted: &[ReactionRecord], truth: &[GroundTruthRecord]) -> Matching {
    let mut candidates = Vec::new();
    for (i, e) in extracted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let s = similarity(e, t);
            if s > Exact::from_integer(0) {
                candidates.push((s, same_yield(e, t), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut used_e = vec![false; extracted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (s, _, i, j) in candidates {
        if !used_e[i] && !used_t[j] {
            used_e[i] = true;
            used_t[j] = true;
            pairs.push(MatchPair {
                extracted: i,
                truth: j,
                similarity: super::metrics::exact_string(s),
            });
        }
    }
    pairs.sort_by_key(|p| (p.extracted, p.truth));
    Matching {
        pairs,
        unmatched_extracted: (0..extracted.len()).filter(|&i| !used_e[i]).collect(),
        unmatched_truth: (0..truth.len()).filter(|&j| !used_t[j]).collect(),
    }
}

/// Per-field counts for one paper. A matched pair only counts toward a
/// field the truth record annotates.
pub fn count_fields(
    matching: &Matching,
    extracted: &[ReactionRecord],
    truth: &[GroundTruthRecord],
    fields: &[Field],
) -> BTreeMap<Field, FieldCounts> {
    let mut out = BTreeMap::new();
    for &f in fields {
        let mut c = FieldCounts {
            total: truth.iter().filter(|t| t.is_annotated(f)).count() as u64,
            ..Default::default()
        };
        for p in &matching.pairs {
            let t = &truth[p.truth];
            if !t.is_annotated(f) {
                continue;
            }
            let ev = extracted_value(&extracted[p.extracted], f);
            if ev.populated() {
                c.extracted += 1;
                if ev == truth_value(t, f) {
                    c.correct += 1;
                }
            }
        }
        out.insert(f, c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coref::MoleculeName;

    fn rec(products: &[&str], solvent: Option<&str>, yield_text: Option<&str>) -> ReactionRecord {
        ReactionRecord {
            paper_id: "p".into(),
            reaction_id: 1,
            reactants: vec![MoleculeName::new("4-methylbenzaldehyde").unwrap()],
            catalyst: None,
            solvent: solvent.map(|s| MoleculeName::new(s).unwrap()),
            products: products.iter().map(|p| MoleculeName::new(*p).unwrap()).collect(),
            yield_text: yield_text.map(String::from),
            unresolved_labels: vec![],
        }
    }

    fn truth_of(r: &ReactionRecord) -> GroundTruthRecord {
        GroundTruthRecord {
            paper_id: r.paper_id.clone(),
            reactants: r.reactants.iter().map(|m| m.raw().to_string()).collect(),
            solvent: r.solvent.as_ref().map(|m| m.raw().to_string()),
            products: r.products.iter().map(|m| m.raw().to_string()).collect(),
            yield_text: r.yield_text.clone(),
            ..Default::default()
        }
    }

    /// Best achievable total similarity over every one-to-one assignment.
    fn exhaustive_best(e: &[ReactionRecord], t: &[GroundTruthRecord]) -> Exact {
        fn go(i: usize, e: &[ReactionRecord], t: &[GroundTruthRecord], used: &mut Vec<bool>) -> Exact {
            if i == e.len() {
                return Exact::from_integer(0);
            }
            let mut best = go(i + 1, e, t, used);
            for j in 0..t.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(similarity(&e[i], &t[j]) + go(i + 1, e, t, used));
                    used[j] = false;
                }
            }
            best
        }
        go(0, e, t, &mut vec![false; t.len()])
    }

    #[test]
    fn identical_single_records() {
        let r = rec(&["3b"], Some("THF"), Some("93%"));
        let m = match_records(std::slice::from_ref(&r), &[truth_of(&r)]);
        assert_eq!(m.pairs.len(), 1);
        assert!(m.unmatched_extracted.is_empty() && m.unmatched_truth.is_empty());
        let counts = count_fields(&m, std::slice::from_ref(&r), &[truth_of(&r)], &Field::SCORED);
        assert!(counts.values().all(|c| *c == FieldCounts::new(1, 1, 1)));
    }

    #[test]
    fn disjoint_products_do_not_match() {
        let a = rec(&["3b"], None, None);
        let b = rec(&["3c"], None, None);
        let m = match_records(&[a], &[truth_of(&b)]);
        assert!(m.pairs.is_empty());
        assert_eq!((m.unmatched_extracted.len(), m.unmatched_truth.len()), (1, 1));
    }

    #[test]
    fn two_extracted_one_truth_agrees_with_exhaustive_oracle() {
        let first = rec(&["3b", "4b"], None, None);
        let second = rec(&["5x"], None, None);
        let truth = [truth_of(&rec(&["3b"], None, None))];
        let extracted = [first, second];
        let m = match_records(&extracted, &truth);
        assert_eq!(m.pairs, [MatchPair { extracted: 0, truth: 0, similarity: "1/2".into() }]);
        assert_eq!(m.unmatched_extracted, [1]);
        let greedy: Exact = m.pairs.iter().map(|p| similarity(&extracted[p.extracted], &truth[p.truth])).sum();
        assert_eq!(greedy, exhaustive_best(&extracted, &truth));
    }

    #[test]
    fn unannotated_reactants_leave_total() {
        let r = rec(&["3b"], Some("THF"), Some("93%"));
        let mut t = truth_of(&r);
        t.annotated.insert(Field::Reactant, false);
        let m = match_records(std::slice::from_ref(&r), std::slice::from_ref(&t));
        let c = count_fields(&m, &[r], &[t], &Field::SCORED);
        assert_eq!(c[&Field::Reactant], FieldCounts::new(0, 0, 0));
        assert_eq!(c[&Field::Yield], FieldCounts::new(1, 1, 1));
    }

    #[test]
    fn wrong_solvent_is_extracted_not_correct() {
        let r = rec(&["3b"], Some("THF"), None);
        let t = truth_of(&rec(&["3b"], Some("toluene"), None));
        let m = match_records(std::slice::from_ref(&r), std::slice::from_ref(&t));
        let c = count_fields(&m, &[r], &[t], &[Field::Solvent]);
        assert_eq!(c[&Field::Solvent], FieldCounts::new(0, 1, 1));
    }

    #[test]
    fn yield_normalization() {
        assert_eq!(normalize_yield(" 85 – 90 ％"), "85-90%");
    }

    #[test]
    fn yield_agreement_breaks_similarity_ties() {
        let a = rec(&["3b"], None, Some("41%"));
        let b = rec(&["3b"], None, Some("93%"));
        let t = truth_of(&rec(&["3b"], None, Some("93%")));
        let m = match_records(&[a, b], &[t]);
        assert_eq!(m.pairs[0].extracted, 1);
    }
}
