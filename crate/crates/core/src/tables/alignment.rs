//! Borderless tables from repeated text alignment.
//!
//! A page's lines are grouped into rows by baseline. Each row is cut into
//! units wherever the horizontal gap between glyphs exceeds `phrase_gap_em`,
//! so a multi-word cell stays one unit while column gutters separate units.
//! Left edges, right edges and centres of units are single-linkage clustered
//! per family; a cluster touching at least `min_group_lines` rows is an
//! [`AlignmentGroup`]. Groups sharing a unit describe the same column.

use std::collections::BTreeSet;

use petgraph::unionfind::UnionFind;

use super::{AlignKind, AlignmentGroup, GridOrigin, TableConfig, TableGrid};
use crate::doc::{Char, Page};

#[derive(Debug)]
struct Row<'a> {
    chars: Vec<&'a Char>,
    y0: f64,
    y1: f64,
}

#[derive(Clone, Copy, Debug)]
struct Unit {
    row: usize,
    x0: f64,
    x1: f64,
}

fn rows_of<'a>(page: &'a Page, cfg: &TableConfig) -> Vec<Row<'a>> {
    let mut lines: Vec<_> = page.lines().collect();
    lines.sort_by(|a, b| a.baseline_y.total_cmp(&b.baseline_y));
    let mut rows: Vec<Row<'a>> = Vec::new();
    let mut last_baseline = f64::NEG_INFINITY;
    for line in lines {
        let chars: Vec<&Char> = line.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            continue;
        }
        let joins = line.baseline_y - last_baseline <= cfg.baseline_tol && !rows.is_empty();
        if !joins {
            rows.push(Row {
                chars: Vec::new(),
                y0: f64::INFINITY,
                y1: f64::NEG_INFINITY,
            });
        }
        let row = rows.last_mut().expect("row pushed");
        for c in chars {
            row.y0 = row.y0.min(c.bbox.y0);
            row.y1 = row.y1.max(c.bbox.y1);
            row.chars.push(c);
        }
        last_baseline = line.baseline_y;
    }
    for row in &mut rows {
        row.chars.sort_by(|a, b| a.bbox.x0.total_cmp(&b.bbox.x0));
    }
    rows
}

fn units_of(rows: &[Row<'_>], cfg: &TableConfig) -> Vec<Unit> {
    let mut units = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        let mut current: Option<Unit> = None;
        let mut prev: Option<&Char> = None;
        for &c in &row.chars {
            let split = prev.is_some_and(|p| {
                c.bbox.x0 - p.bbox.x1 > cfg.phrase_gap_em * p.font_size.max(c.font_size)
            });
            match (&mut current, split) {
                (Some(u), false) => u.x1 = u.x1.max(c.bbox.x1),
                _ => {
                    if let Some(u) = current.take() {
                        units.push(u);
                    }
                    current = Some(Unit {
                        row: ri,
                        x0: c.bbox.x0,
                        x1: c.bbox.x1,
                    });
                }
            }
            prev = Some(c);
        }
        units.extend(current);
    }
    units
}

/// Alignment groups with the indices of the units they contain.
fn groups_of(units: &[Unit], cfg: &TableConfig) -> Vec<(AlignmentGroup, Vec<usize>)> {
    let mut groups = Vec::new();
    for kind in [AlignKind::Left, AlignKind::Right, AlignKind::Center] {
        let mut values: Vec<(f64, usize)> = units
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let v = match kind {
                    AlignKind::Left => u.x0,
                    AlignKind::Right => u.x1,
                    AlignKind::Center => (u.x0 + u.x1) / 2.0,
                };
                (v, i)
            })
            .collect();
        values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut start = 0;
        while start < values.len() {
            let mut end = start + 1;
            while end < values.len() && values[end].0 - values[end - 1].0 <= cfg.clustering_tol {
                end += 1;
            }
            let members = &values[start..end];
            let lines: BTreeSet<usize> = members.iter().map(|(_, u)| units[*u].row).collect();
            if lines.len() >= cfg.min_group_lines {
                let axis_x = members.iter().map(|m| m.0).sum::<f64>() / members.len() as f64;
                groups.push((
                    AlignmentGroup {
                        axis_x,
                        kind,
                        member_lines: lines,
                    },
                    members.iter().map(|m| m.1).collect(),
                ));
            }
            start = end;
        }
    }
    groups
}

/// The alignment groups found on a page; `member_lines` index rows in
/// top-to-bottom order.
pub fn alignment_groups(page: &Page, cfg: &TableConfig) -> Vec<AlignmentGroup> {
    let rows = rows_of(page, cfg);
    let units = units_of(&rows, cfg);
    groups_of(&units, cfg).into_iter().map(|(g, _)| g).collect()
}

pub fn detect_alignment_grids(page: &Page, cfg: &TableConfig) -> Vec<TableGrid> {
    let rows = rows_of(page, cfg);
    let units = units_of(&rows, cfg);
    let groups = groups_of(&units, cfg);
    if groups.is_empty() {
        return Vec::new();
    }

    // Column id per unit: groups sharing any unit are one column. A phrase
    // alone on its row (a caption, a prose line) can line up with two
    // unrelated columns at once, so only rows with several units join them.
    let mut per_row = vec![0usize; rows.len()];
    for u in &units {
        per_row[u.row] += 1;
    }
    let mut uf = UnionFind::<usize>::new(groups.len());
    let mut owner: Vec<Option<usize>> = vec![None; units.len()];
    for (gi, (_, members)) in groups.iter().enumerate() {
        for &u in members {
            if per_row[units[u].row] < 2 {
                continue;
            }
            match owner[u] {
                Some(g) => {
                    uf.union(g, gi);
                }
                None => owner[u] = Some(gi),
            }
        }
    }
    let column: Vec<Option<usize>> = owner.iter().map(|o| o.map(|g| uf.find(g))).collect();

    let mut row_columns: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); rows.len()];
    for (u, col) in units.iter().zip(&column) {
        if let Some(c) = col {
            row_columns[u.row].insert(*c);
        }
    }

    let mut grids = Vec::new();
    let mut r = 0;
    while r < rows.len() {
        if row_columns[r].len() < 2 {
            r += 1;
            continue;
        }
        let start = r;
        while r < rows.len() && row_columns[r].len() >= 2 {
            r += 1;
        }
        if r - start >= cfg.min_group_lines {
            if let Some(grid) = region_grid(page, cfg, &rows[start..r], start, &units, &column) {
                grids.push(grid);
            }
        }
    }
    grids
}

fn region_grid(
    page: &Page,
    cfg: &TableConfig,
    rows: &[Row<'_>],
    first_row: usize,
    units: &[Unit],
    column: &[Option<usize>],
) -> Option<TableGrid> {
    let in_region = |u: &Unit| u.row >= first_row && u.row < first_row + rows.len();
    // Column extents over the region, keeping columns seen on two or more rows.
    let mut extents: std::collections::BTreeMap<usize, (f64, f64, BTreeSet<usize>)> = Default::default();
    for (u, col) in units.iter().zip(column) {
        if let (true, Some(c)) = (in_region(u), col) {
            let e = extents
                .entry(*c)
                .or_insert((f64::INFINITY, f64::NEG_INFINITY, BTreeSet::new()));
            e.0 = e.0.min(u.x0);
            e.1 = e.1.max(u.x1);
            e.2.insert(u.row);
        }
    }
    let mut cols: Vec<(f64, f64)> = extents
        .into_values()
        .filter(|e| e.2.len() >= 2)
        .map(|e| (e.0, e.1))
        .collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for c in cols {
        match merged.last_mut() {
            Some(last) if c.0 < last.1 => last.1 = last.1.max(c.1),
            _ => merged.push(c),
        }
    }
    if merged.len() < 2 {
        return None;
    }

    let m = cfg.outer_margin;
    let mut xs = vec![(merged[0].0 - m).max(0.0)];
    xs.extend(merged.windows(2).map(|w| (w[0].1 + w[1].0) / 2.0));
    xs.push((merged.last().expect("non-empty").1 + m).min(page.width));

    let mut ys = vec![(rows[0].y0 - m).max(0.0)];
    ys.extend(rows.windows(2).map(|w| (w[0].y1 + w[1].y0) / 2.0));
    ys.push((rows.last().expect("non-empty").y1 + m).min(page.height));

    let grid = TableGrid::empty(page.index, xs, ys, GridOrigin::Alignment);
    grid.is_well_formed().then_some(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::PageBuilder;

    fn two_column_page(jitter: &[f64]) -> Page {
        let cells = [["Solvent", "bp"], ["THF", "66"], ["toluene", "111"], ["DMF", "153"]];
        let mut b = PageBuilder::new(0, 612.0, 792.0);
        for (i, row) in cells.iter().enumerate() {
            let y = 100.0 + 14.0 * i as f64;
            b = b
                .text(72.0 + jitter[2 * i], y, row[0], 10.0, 5.0)
                .text(200.0 + jitter[2 * i + 1], y, row[1], 10.0, 5.0);
        }
        b.build()
    }

    #[test]
    fn prose_yields_nothing() {
        let page = PageBuilder::new(0, 612.0, 792.0)
            .text(72.0, 100.0, "The aldehyde was stirred in dry THF for two hours", 10.0, 5.0)
            .text(72.0, 112.0, "before the boronic acid was added in one portion", 10.0, 5.0)
            .text(72.0, 124.0, "and the mixture was heated to reflux overnight.", 10.0, 5.0)
            .build();
        assert!(detect_alignment_grids(&page, &TableConfig::default()).is_empty());
    }

    #[test]
    fn two_columns_four_rows_at_midpoints() {
        let page = two_column_page(&[0.0; 8]);
        let grids = detect_alignment_grids(&page, &TableConfig::default());
        assert_eq!(grids.len(), 1);
        let g = &grids[0];
        assert_eq!((g.rows(), g.cols()), (4, 2));
        // Column one spans 72..72+7*5 ("Solvent"/"toluene"), column two starts at 200.
        assert_eq!(g.col_boundaries[1], (72.0 + 35.0 + 200.0) / 2.0);
        // Rows: chars span baseline-7.5..baseline+2.5, baselines 14 apart.
        assert_eq!(g.row_boundaries[1], (102.5 + 106.5) / 2.0);
        assert_eq!(g.origin, GridOrigin::Alignment);
    }

    #[test]
    fn bounded_jitter_keeps_shape() {
        let page = two_column_page(&[0.7, -1.1, 1.4, 0.2, -0.9, 1.3, 0.0, -1.4]);
        let grids = detect_alignment_grids(&page, &TableConfig::default());
        assert_eq!(grids.len(), 1);
        assert_eq!((grids[0].rows(), grids[0].cols()), (4, 2));
    }

    #[test]
    fn caption_edge_does_not_join_columns() {
        // The caption's right edge lines up with the right edges of the
        // second column, its left edge with the first column.
        let mut b = PageBuilder::new(0, 612.0, 792.0).text(72.0, 86.0, &"x".repeat(27), 10.0, 5.0);
        for (i, row) in [["Solvent", "bp", "mp"], ["THF", "66", "-108"], ["toluene", "111", "-95"], ["DMF", "153", "-61"]]
            .iter()
            .enumerate()
        {
            let y = 100.0 + 14.0 * i as f64;
            let right = 207.0 - 5.0 * row[1].len() as f64;
            b = b.text(72.0, y, row[0], 10.0, 5.0).text(right, y, row[1], 10.0, 5.0).text(260.0, y, row[2], 10.0, 5.0);
        }
        let grids = detect_alignment_grids(&b.build(), &TableConfig::default());
        assert_eq!(grids.len(), 1);
        assert_eq!((grids[0].rows(), grids[0].cols()), (4, 3));
    }

    #[test]
    fn groups_report_member_lines() {
        let page = two_column_page(&[0.0; 8]);
        let groups = alignment_groups(&page, &TableConfig::default());
        let left: Vec<_> = groups.iter().filter(|g| g.kind == AlignKind::Left).collect();
        assert_eq!(left.len(), 2);
        assert!(left.iter().all(|g| g.member_lines.len() == 4));
    }
}
