use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use super::{CorefLabel, MoleculeName};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentId {
    Agent1,
    Agent2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Table,
    Figure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub page_index: usize,
    pub agent_id: AgentId,
    pub modality: Modality,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefEntry {
    pub label: CorefLabel,
    pub molecule: MoleculeName,
    pub provenance: Provenance,
    /// Text the pair was found in; shown to the backend on revisits.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub context: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertOutcome {
    Inserted,
    Duplicate,
    Conflict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub label: CorefLabel,
    pub existing: CorefEntry,
    pub incoming: CorefEntry,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Record {
    live: CorefEntry,
    /// Normalized molecules ever inserted for the label, first one first.
    distinct: Vec<String>,
    conflicts: usize,
    tombstoned: bool,
}

/// Label → molecule mappings with conflict tracking.
///
/// The first molecule seen for a label stays live until a revisit decides
/// otherwise. Every new distinct molecule for a known label is a conflict,
/// logged permanently and queued for revisit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorefDictionary {
    records: BTreeMap<CorefLabel, Record>,
    revisit_queue: Vec<Conflict>,
    conflict_log: Vec<Conflict>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RevisitOutcome {
    /// The live molecule was confirmed; `rejected` is the losing candidate.
    Confirmed { molecule: String, rejected: String },
    /// The incoming molecule won and replaced the live one.
    Replaced { molecule: String, rejected: String },
    /// The answer matched neither candidate.
    Tombstoned { answer: String },
    /// The backend failed; the conflict stays queued.
    Failed { error: String },
    /// The label was already tombstoned by an earlier revisit.
    AlreadyTombstoned,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisitItem {
    pub label: CorefLabel,
    #[serde(flatten)]
    pub outcome: RevisitOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub items: Vec<RevisitItem>,
}

impl CorefDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: CorefEntry) -> InsertOutcome {
        let label = entry.label.clone();
        match self.records.get_mut(&label) {
            None => {
                let distinct = vec![entry.molecule.normalized().to_string()];
                self.records.insert(
                    label,
                    Record {
                        live: entry,
                        distinct,
                        conflicts: 0,
                        tombstoned: false,
                    },
                );
                InsertOutcome::Inserted
            }
            Some(rec) => {
                let norm = entry.molecule.normalized();
                if rec.distinct.iter().any(|d| d == norm) {
                    return InsertOutcome::Duplicate;
                }
                rec.distinct.push(norm.to_string());
                rec.conflicts += 1;
                let conflict = Conflict {
                    label,
                    existing: rec.live.clone(),
                    incoming: entry,
                };
                if !rec.tombstoned {
                    self.revisit_queue.push(conflict.clone());
                }
                self.conflict_log.push(conflict);
                InsertOutcome::Conflict
            }
        }
    }

    /// The live molecule for `label`, unless absent or tombstoned.
    pub fn resolve(&self, label: &str) -> Option<&MoleculeName> {
        let label = CorefLabel::new(&label.to_lowercase())?;
        self.records
            .get(&label)
            .filter(|r| !r.tombstoned)
            .map(|r| &r.live.molecule)
    }

    pub fn entry(&self, label: &str) -> Option<&CorefEntry> {
        let label = CorefLabel::new(&label.to_lowercase())?;
        self.records.get(&label).filter(|r| !r.tombstoned).map(|r| &r.live)
    }

    /// Live entries in label order.
    pub fn entries(&self) -> impl Iterator<Item = &CorefEntry> {
        self.records.values().filter(|r| !r.tombstoned).map(|r| &r.live)
    }

    pub fn len(&self) -> usize {
        self.entries().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tombstones(&self) -> impl Iterator<Item = &CorefLabel> {
        self.records.iter().filter(|(_, r)| r.tombstoned).map(|(l, _)| l)
    }

    pub fn is_tombstoned(&self, label: &str) -> bool {
        CorefLabel::new(&label.to_lowercase())
            .and_then(|l| self.records.get(&l))
            .is_some_and(|r| r.tombstoned)
    }

    pub fn revisit_queue(&self) -> &[Conflict] {
        &self.revisit_queue
    }

    pub fn conflict_log(&self) -> &[Conflict] {
        &self.conflict_log
    }

    /// Conflicts recorded for `label` over the dictionary's lifetime.
    pub fn conflict_count(&self, label: &str) -> usize {
        CorefLabel::new(&label.to_lowercase())
            .and_then(|l| self.records.get(&l))
            .map_or(0, |r| r.conflicts)
    }

    /// Distinct normalized molecules ever inserted for `label`.
    pub fn candidates(&self, label: &str) -> &[String] {
        CorefLabel::new(&label.to_lowercase())
            .and_then(|l| self.records.get(&l))
            .map_or(&[], |r| r.distinct.as_slice())
    }

    /// Settles queued conflicts by asking `ask` once per conflict.
    ///
    /// The answer is compared with both candidates after normalization. A
    /// match decides the winner; anything else tombstones the label. Failed
    /// questions leave their conflict queued.
    pub fn process_revisits<E: std::fmt::Display>(
        &mut self,
        mut ask: impl FnMut(&Conflict) -> Result<String, E>,
    ) -> ResolutionReport {
        let queue = std::mem::take(&mut self.revisit_queue);
        let mut report = ResolutionReport::default();
        for conflict in queue {
            let rec = self.records.get_mut(&conflict.label).expect("conflicts refer to known labels");
            if rec.tombstoned {
                report.items.push(RevisitItem {
                    label: conflict.label.clone(),
                    outcome: RevisitOutcome::AlreadyTombstoned,
                });
                continue;
            }
            // Ask about the molecule that is live now, which an earlier
            // revisit may have changed.
            let current = Conflict {
                label: conflict.label.clone(),
                existing: rec.live.clone(),
                incoming: conflict.incoming.clone(),
            };
            let outcome = match ask(&current) {
                Err(e) => {
                    self.revisit_queue.push(conflict.clone());
                    RevisitOutcome::Failed { error: e.to_string() }
                }
                Ok(answer) => match MoleculeName::new(answer.clone()) {
                    Some(a) if a.same_molecule(&current.existing.molecule) => RevisitOutcome::Confirmed {
                        molecule: current.existing.molecule.raw().to_string(),
                        rejected: current.incoming.molecule.raw().to_string(),
                    },
                    Some(a) if a.same_molecule(&current.incoming.molecule) => {
                        rec.live = current.incoming.clone();
                        RevisitOutcome::Replaced {
                            molecule: current.incoming.molecule.raw().to_string(),
                            rejected: current.existing.molecule.raw().to_string(),
                        }
                    }
                    _ => {
                        rec.tombstoned = true;
                        RevisitOutcome::Tombstoned { answer }
                    }
                },
            };
            report.items.push(RevisitItem {
                label: conflict.label,
                outcome,
            });
        }
        report
    }

    pub fn dump(&self) -> DictionaryDump {
        DictionaryDump {
            entries: self
                .entries()
                .map(|e| {
                    (
                        e.label.to_string(),
                        DumpEntry {
                            molecule_raw: e.molecule.raw().to_string(),
                            molecule_normalized: e.molecule.normalized().to_string(),
                            provenance: e.provenance,
                        },
                    )
                })
                .collect(),
            conflicts: self
                .conflict_log
                .iter()
                .map(|c| DumpConflict {
                    label: c.label.to_string(),
                    existing: DumpEntry::of(&c.existing),
                    incoming: DumpEntry::of(&c.incoming),
                })
                .collect(),
            tombstones: self.tombstones().map(|l| l.to_string()).collect(),
            pending_revisits: self.revisit_queue.iter().map(|c| c.label.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub molecule_raw: String,
    pub molecule_normalized: String,
    pub provenance: Provenance,
}

impl DumpEntry {
    fn of(e: &CorefEntry) -> Self {
        Self {
            molecule_raw: e.molecule.raw().to_string(),
            molecule_normalized: e.molecule.normalized().to_string(),
            provenance: e.provenance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpConflict {
    pub label: String,
    pub existing: DumpEntry,
    pub incoming: DumpEntry,
}

/// The on-disk dictionary form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryDump {
    pub entries: BTreeMap<String, DumpEntry>,
    pub conflicts: Vec<DumpConflict>,
    pub tombstones: BTreeSet<String>,
    pub pending_revisits: Vec<String>,
}

/// A dictionary shared between concurrent workers. Each call holds the lock
/// for its whole duration, so inserts are linearizable.
#[derive(Debug, Default)]
pub struct SharedDictionary {
    inner: Mutex<CorefDictionary>,
}

impl SharedDictionary {
    pub fn new(dict: CorefDictionary) -> Self {
        Self {
            inner: Mutex::new(dict),
        }
    }

    fn lock(&self) -> MutexGuard<'_, CorefDictionary> {
        // A panicking holder cannot leave a half-applied insert behind, so
        // the data is still consistent.
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn insert(&self, entry: CorefEntry) -> InsertOutcome {
        self.lock().insert(entry)
    }

    pub fn resolve(&self, label: &str) -> Option<MoleculeName> {
        self.lock().resolve(label).cloned()
    }

    pub fn snapshot(&self) -> CorefDictionary {
        self.lock().clone()
    }

    /// Exclusive access, e.g. for [`CorefDictionary::process_revisits`].
    pub fn with<R>(&self, f: impl FnOnce(&mut CorefDictionary) -> R) -> R {
        f(&mut self.lock())
    }

    pub fn into_inner(self) -> CorefDictionary {
        self.inner.into_inner().unwrap_or_else(|p| p.into_inner())
    }
}
