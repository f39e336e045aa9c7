//! Coreference labels and the shared label → molecule dictionary.

mod dictionary;
mod label;
mod molecule;

pub use dictionary::{
    AgentId, Conflict, CorefDictionary, CorefEntry, DictionaryDump, DumpConflict, DumpEntry, InsertOutcome,
    Modality, Provenance, ResolutionReport, RevisitItem, RevisitOutcome, SharedDictionary,
};
pub(crate) use label::occurrences;
pub use label::{
    is_chemical_looking, matches_label_pattern, validate_label, validate_label_styled, CorefLabel, LabelVerdict,
    RejectReason, ACCEPT_CUES, ANTI_CUES,
};
pub use molecule::{normalize_name, MoleculeName};
