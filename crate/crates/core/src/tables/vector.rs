use petgraph::unionfind::UnionFind;

use super::{GridLine, GridOrigin, LineOrigin, TableConfig, TableGrid};
use crate::doc::{Orientation, Page, VectorSegment};
use crate::geometry::Interval;

/// Merges collinear axis-aligned segments into maximal grid lines.
///
/// Segments of one orientation are single-linkage clustered on their fixed
/// coordinate (within `axis_tol`); inside a cluster, intervals separated by
/// at most `merge_gap` are joined. Diagonal segments are dropped.
pub fn merge_segments(segments: &[VectorSegment], cfg: &TableConfig) -> Vec<GridLine> {
    let mut out = Vec::new();
    for orientation in [Orientation::Horizontal, Orientation::Vertical] {
        let mut items: Vec<(f64, Interval)> = segments
            .iter()
            .filter(|s| s.orientation(cfg.axis_tol) == Some(orientation))
            .map(|s| match orientation {
                Orientation::Horizontal => ((s.p0.y + s.p1.y) / 2.0, Interval::new(s.p0.x, s.p1.x)),
                Orientation::Vertical => ((s.p0.x + s.p1.x) / 2.0, Interval::new(s.p0.y, s.p1.y)),
            })
            .collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.lo.total_cmp(&b.1.lo)));

        let mut start = 0;
        while start < items.len() {
            let mut end = start + 1;
            while end < items.len() && items[end].0 - items[end - 1].0 <= cfg.axis_tol {
                end += 1;
            }
            let mut cluster = items[start..end].to_vec();
            cluster.sort_by(|a, b| a.1.lo.total_cmp(&b.1.lo).then(a.0.total_cmp(&b.0)));
            let mut run: Vec<(f64, Interval)> = Vec::new();
            let flush = |run: &mut Vec<(f64, Interval)>, out: &mut Vec<GridLine>| {
                if run.is_empty() {
                    return;
                }
                let coordinate = run.iter().map(|r| r.0).sum::<f64>() / run.len() as f64;
                let lo = run.iter().map(|r| r.1.lo).fold(f64::INFINITY, f64::min);
                let hi = run.iter().map(|r| r.1.hi).fold(f64::NEG_INFINITY, f64::max);
                out.push(GridLine {
                    orientation,
                    coordinate,
                    span: Interval::new(lo, hi),
                    origin: LineOrigin::Vector,
                });
                run.clear();
            };
            let mut reach = f64::NEG_INFINITY;
            for item in cluster {
                if !run.is_empty() && item.1.lo - reach > cfg.merge_gap {
                    flush(&mut run, &mut out);
                }
                reach = if run.is_empty() { item.1.hi } else { reach.max(item.1.hi) };
                run.push(item);
            }
            flush(&mut run, &mut out);
            start = end;
        }
    }
    out
}

fn crosses(h: &GridLine, v: &GridLine, snap: f64) -> bool {
    h.span.contains(v.coordinate, snap) && v.span.contains(h.coordinate, snap)
}

/// Sorted coordinates with values closer than `tol` collapsed to their mean.
fn distinct(mut values: Vec<f64>, tol: f64) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    for v in values {
        if group.last().is_some_and(|last| v - last > tol) {
            out.push(group.iter().sum::<f64>() / group.len() as f64);
            group.clear();
        }
        group.push(v);
    }
    if !group.is_empty() {
        out.push(group.iter().sum::<f64>() / group.len() as f64);
    }
    out
}

pub fn detect_vector_grids(page: &Page, cfg: &TableConfig) -> Vec<TableGrid> {
    let lines = merge_segments(&page.vector_segments, cfg);
    let (h, v): (Vec<&GridLine>, Vec<&GridLine>) =
        lines.iter().partition(|l| l.orientation == Orientation::Horizontal);
    if h.is_empty() || v.is_empty() {
        return Vec::new();
    }

    let edges: Vec<(usize, usize)> = h
        .iter()
        .enumerate()
        .flat_map(|(i, hl)| {
            v.iter()
                .enumerate()
                .filter(move |(_, vl)| crosses(hl, vl, cfg.snap_tol))
                .map(move |(j, _)| (i, j))
        })
        .collect();

    // Strays that touch the lattice once (tick marks, underlines) are pruned
    // until every remaining line meets at least two others.
    let mut alive = vec![true; h.len() + v.len()];
    loop {
        let mut degree = vec![0usize; alive.len()];
        for &(i, j) in &edges {
            if alive[i] && alive[h.len() + j] {
                degree[i] += 1;
                degree[h.len() + j] += 1;
            }
        }
        let mut changed = false;
        for (a, d) in alive.iter_mut().zip(&degree) {
            if *a && *d < 2 {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut uf = UnionFind::<usize>::new(alive.len());
    for &(i, j) in &edges {
        if alive[i] && alive[h.len() + j] {
            uf.union(i, h.len() + j);
        }
    }
    let mut components: std::collections::BTreeMap<usize, (Vec<f64>, Vec<f64>)> = Default::default();
    for (idx, _) in alive.iter().enumerate().filter(|(_, a)| **a) {
        let entry = components.entry(uf.find(idx)).or_default();
        if idx < h.len() {
            entry.1.push(h[idx].coordinate);
        } else {
            entry.0.push(v[idx - h.len()].coordinate);
        }
    }

    let mut grids: Vec<TableGrid> = components
        .into_values()
        .filter_map(|(xs, ys)| {
            let xs = distinct(xs, cfg.snap_tol);
            let ys = distinct(ys, cfg.snap_tol);
            (xs.len() >= 3 && ys.len() >= 3).then(|| TableGrid::empty(page.index, xs, ys, GridOrigin::Vector))
        })
        .collect();
    grids.sort_by(|a, b| {
        a.row_boundaries[0]
            .total_cmp(&b.row_boundaries[0])
            .then(a.col_boundaries[0].total_cmp(&b.col_boundaries[0]))
    });
    grids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::PageBuilder;

    fn lattice(rows: usize, cols: usize, x0: f64, y0: f64, w: f64, h: f64) -> PageBuilder {
        let mut b = PageBuilder::new(0, 612.0, 792.0);
        let (x1, y1) = (x0 + w * cols as f64, y0 + h * rows as f64);
        for r in 0..=rows {
            let y = y0 + h * r as f64;
            b = b.segment(x0, y, x1, y);
        }
        for c in 0..=cols {
            let x = x0 + w * c as f64;
            b = b.segment(x, y0, x, y1);
        }
        b
    }

    #[test]
    fn no_segments_no_grids() {
        let page = PageBuilder::new(0, 612.0, 792.0).build();
        assert!(detect_vector_grids(&page, &TableConfig::default()).is_empty());
    }

    #[test]
    fn four_by_four_lines_give_three_by_three_cells() {
        let page = lattice(3, 3, 100.0, 100.0, 50.0, 20.0).build();
        let cfg = TableConfig::default();
        let lines = merge_segments(&page.vector_segments, &cfg);
        let (h, v): (Vec<_>, Vec<_>) = lines.iter().partition(|l| l.orientation == Orientation::Horizontal);
        let crossings = h.iter().flat_map(|a| v.iter().map(move |b| (a, b))).filter(|(a, b)| crosses(a, b, 1.0));
        assert_eq!(crossings.count(), 16);
        let grids = detect_vector_grids(&page, &cfg);
        assert_eq!(grids.len(), 1);
        assert_eq!((grids[0].rows(), grids[0].cols()), (3, 3));
        assert_eq!(grids[0].col_boundaries, [100.0, 150.0, 200.0, 250.0]);
    }

    #[test]
    fn split_segment_with_small_gap_merges() {
        let whole = lattice(3, 3, 100.0, 100.0, 50.0, 20.0).build();
        let mut split = whole.clone();
        // Replace the second horizontal line with two pieces 1 pt apart.
        let seg = split.vector_segments.remove(1);
        let mid = 170.0;
        split.vector_segments.push(VectorSegment::new(seg.p0, crate::Point::new(mid, seg.p0.y), 0.5));
        split.vector_segments.push(VectorSegment::new(crate::Point::new(mid + 1.0, seg.p0.y), seg.p1, 0.5));
        let cfg = TableConfig::default();
        assert_eq!(detect_vector_grids(&whole, &cfg), detect_vector_grids(&split, &cfg));
    }

    #[test]
    fn stray_tick_is_pruned() {
        let page = lattice(2, 2, 100.0, 100.0, 50.0, 20.0)
            .segment(120.0, 90.0, 120.0, 100.0)
            .build();
        let grids = detect_vector_grids(&page, &TableConfig::default());
        assert_eq!(grids.len(), 1);
        assert_eq!(grids[0].col_boundaries, [100.0, 150.0, 200.0]);
    }

    #[test]
    fn lone_rectangle_is_not_a_table() {
        let page = lattice(1, 1, 100.0, 100.0, 50.0, 20.0).build();
        assert!(detect_vector_grids(&page, &TableConfig::default()).is_empty());
    }
}
