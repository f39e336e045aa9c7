//! Scoring extracted reactions against annotated ground truth.
//!
//! Counts are summed across papers before any ratio is taken. Ratios are
//! exact rationals and are rounded half-up to two decimals only for display.

mod matching;
mod metrics;
mod report;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

pub use matching::{count_fields, match_records, normalize_yield, similarity, Field, GroundTruthRecord, MatchPair, Matching};
pub use metrics::{compute_metrics, exact_string, Exact, FieldCounts, MetricRow, Percent2, UndefinedField};
pub use report::{
    build_report, read_timing, report_from_counts, write_timing, CostTime, EvalOptions, EvalReport, ExactRow,
    FieldReport, MacroAverage, PaperInput, PaperMatching, Rounded, TimingRow,
};

use crate::reactions::ReactionRecord;

fn json_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "json") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Pairs extracted reaction files with ground-truth files by paper id.
///
/// Under `extracted`, every JSON file holding a reaction array is read,
/// recursively, so a pipeline output directory works as is. Under `truth`,
/// each JSON file is one paper; records without a `paper_id` take the file
/// stem. Papers with extractions but no truth are skipped.
pub fn load_papers(extracted: &Path, truth: &Path) -> io::Result<Vec<PaperInput>> {
    let mut papers: BTreeMap<String, PaperInput> = BTreeMap::new();
    for path in json_files(truth)? {
        let text = std::fs::read_to_string(&path)?;
        let records: Vec<GroundTruthRecord> = serde_json::from_str(&text)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for mut r in records {
            if r.paper_id.is_empty() {
                r.paper_id = stem.clone();
            }
            let entry = papers.entry(r.paper_id.clone()).or_insert_with(|| PaperInput {
                paper_id: r.paper_id.clone(),
                ..Default::default()
            });
            entry.truth.push(r);
        }
    }
    for path in json_files(extracted)? {
        let text = std::fs::read_to_string(&path)?;
        let Ok(records) = serde_json::from_str::<Vec<ReactionRecord>>(&text) else {
            continue;
        };
        for r in records {
            match papers.get_mut(&r.paper_id) {
                Some(p) => p.extracted.push(r),
                None => log::warn!("no ground truth for paper {:?}; skipped", r.paper_id),
            }
        }
    }
    Ok(papers.into_values().collect())
}
