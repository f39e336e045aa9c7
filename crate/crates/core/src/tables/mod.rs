//! Table detection.
//!
//! Two detectors run on every page: [`detect_vector_grids`] reads explicit
//! ruling lines and [`detect_alignment_grids`] infers virtual boundaries from
//! text that lines up across rows. [`fuse_and_fill`] reconciles their output
//! and fills cell text; [`merge_cross_page`] joins segments that continue on
//! the next page.

mod alignment;
mod fuse;
mod merge;
mod vector;

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::doc::{Orientation, Page};
use crate::geometry::{BBox, Interval};

pub use alignment::{alignment_groups, detect_alignment_grids};
pub use fuse::fuse_and_fill;
pub use merge::merge_cross_page;
pub use vector::{detect_vector_grids, merge_segments};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub axis_tol: f64,
    pub clustering_tol: f64,
    pub min_group_lines: usize,
    pub merge_gap: f64,
    pub snap_tol: f64,
    pub bottom_margin: f64,
    pub top_margin: f64,
    pub col_match_tol: f64,
    pub iou_threshold: f64,
    /// Horizontal gap, in ems, that separates two text units on a row.
    pub phrase_gap_em: f64,
    /// Padding added outside the outermost virtual boundaries.
    pub outer_margin: f64,
    /// Lines whose baselines differ by at most this much form one row.
    pub baseline_tol: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            axis_tol: 0.5,
            clustering_tol: 3.0,
            min_group_lines: 3,
            merge_gap: 3.0,
            snap_tol: 1.0,
            bottom_margin: 72.0,
            top_margin: 72.0,
            col_match_tol: 4.0,
            iou_threshold: 0.5,
            phrase_gap_em: 1.0,
            outer_margin: 2.0,
            baseline_tol: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridOrigin {
    Vector,
    Alignment,
    Fused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineOrigin {
    Vector,
    Virtual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLine {
    pub orientation: Orientation,
    pub coordinate: f64,
    pub span: Interval,
    pub origin: LineOrigin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignKind {
    Left,
    Right,
    Center,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentGroup {
    pub axis_x: f64,
    pub kind: AlignKind,
    pub member_lines: std::collections::BTreeSet<usize>,
}

/// A detected table.
///
/// Boundaries are in the coordinate frame of `page_range.0`; rows from later
/// pages of a merged table are stacked below it, offset by the heights of
/// the pages before them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub page_range: (usize, usize),
    pub col_boundaries: Vec<f64>,
    pub row_boundaries: Vec<f64>,
    pub cells: Vec<Vec<String>>,
    pub origin: GridOrigin,
}

impl TableGrid {
    pub(crate) fn empty(page: usize, cols: Vec<f64>, rows: Vec<f64>, origin: GridOrigin) -> Self {
        let cells = vec![vec![String::new(); cols.len().saturating_sub(1)]; rows.len().saturating_sub(1)];
        Self {
            page_range: (page, page),
            col_boundaries: cols,
            row_boundaries: rows,
            cells,
            origin,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_boundaries.len().saturating_sub(1)
    }

    pub fn cols(&self) -> usize {
        self.col_boundaries.len().saturating_sub(1)
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.col_boundaries[0],
            self.row_boundaries[0],
            *self.col_boundaries.last().expect("at least two boundaries"),
            *self.row_boundaries.last().expect("at least two boundaries"),
        )
    }

    /// Checks the shape invariants: at least 2×2, strictly increasing
    /// boundaries, and a cell matrix of matching size.
    pub fn is_well_formed(&self) -> bool {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        self.rows() >= 2
            && self.cols() >= 2
            && increasing(&self.col_boundaries)
            && increasing(&self.row_boundaries)
            && self.cells.len() == self.rows()
            && self.cells.iter().all(|r| r.len() == self.cols())
    }

    /// Rows as pipe-delimited text, one row per line.
    pub fn to_pipe_text(&self) -> String {
        let mut out = String::new();
        for row in &self.cells {
            out.push_str(&row.join(" | "));
            out.push('\n');
        }
        out
    }
}

/// True when two boxes overlap enough to describe the same table: IoU at or
/// above `threshold`, or the smaller box mostly inside the larger one.
pub(crate) fn same_region(a: &BBox, b: &BBox, threshold: f64) -> bool {
    if a.iou(b) >= threshold {
        return true;
    }
    let inter = a.intersection(b).map_or(0.0, |i| i.area());
    let smaller = a.area().min(b.area());
    smaller > 0.0 && inter / smaller >= threshold
}

/// Runs both detectors on one page and fuses the result.
pub fn detect_tables(page: &Page, cfg: &TableConfig) -> Vec<TableGrid> {
    let vector = detect_vector_grids(page, cfg);
    let alignment = detect_alignment_grids(page, cfg);
    fuse_and_fill(page, vector, alignment, cfg)
}

/// Writes one JSON file per table into `dir`, named by position.
pub fn write_table_dump(dir: &Path, tables: &[TableGrid]) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(tables.len());
    for (i, t) in tables.iter().enumerate() {
        let path = dir.join(format!("table_{i:03}.json"));
        let mut json = serde_json::to_string_pretty(t).map_err(io::Error::other)?;
        json.push('\n');
        std::fs::write(&path, json)?;
        paths.push(path);
    }
    Ok(paths)
}
