use super::{same_region, GridOrigin, TableConfig, TableGrid};
use crate::doc::{order_chars, render_text, Char, Page, TextOptions};

/// Resolves overlapping detections and fills cell text.
///
/// Explicit borders win: an alignment grid covering the same region as a
/// vector grid is dropped and the vector grid is marked [`GridOrigin::Fused`].
/// Among grids of one origin, the larger of two overlapping grids is kept.
pub fn fuse_and_fill(
    page: &Page,
    vector: Vec<TableGrid>,
    alignment: Vec<TableGrid>,
    cfg: &TableConfig,
) -> Vec<TableGrid> {
    let by_area_desc = |mut v: Vec<TableGrid>| {
        // Stable sort keeps detector order among equal areas.
        v.sort_by(|a, b| b.bbox().area().total_cmp(&a.bbox().area()));
        v
    };
    let mut kept: Vec<TableGrid> = Vec::new();
    for g in by_area_desc(vector) {
        if !kept.iter().any(|k| same_region(&k.bbox(), &g.bbox(), cfg.iou_threshold)) {
            kept.push(g);
        }
    }
    let vector_count = kept.len();
    for g in by_area_desc(alignment) {
        let bbox = g.bbox();
        if let Some(v) = kept[..vector_count]
            .iter_mut()
            .find(|k| same_region(&k.bbox(), &bbox, cfg.iou_threshold))
        {
            v.origin = GridOrigin::Fused;
            continue;
        }
        if !kept.iter().any(|k| same_region(&k.bbox(), &bbox, cfg.iou_threshold)) {
            kept.push(g);
        }
    }

    kept.sort_by(|a, b| {
        a.row_boundaries[0]
            .total_cmp(&b.row_boundaries[0])
            .then(a.col_boundaries[0].total_cmp(&b.col_boundaries[0]))
    });
    for grid in &mut kept {
        fill_cells(page, grid);
    }
    kept
}

fn locate(bounds: &[f64], v: f64) -> Option<usize> {
    if v < bounds[0] || v >= *bounds.last()? {
        return None;
    }
    Some(bounds.partition_point(|b| *b <= v) - 1)
}

/// Assigns every glyph whose centre lies inside a cell to that cell.
pub(crate) fn fill_cells(page: &Page, grid: &mut TableGrid) {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut buckets: Vec<Vec<&Char>> = vec![Vec::new(); rows * cols];
    for c in page.chars() {
        let center = c.bbox.center();
        if let (Some(r), Some(col)) = (
            locate(&grid.row_boundaries, center.y),
            locate(&grid.col_boundaries, center.x),
        ) {
            buckets[r * cols + col].push(c);
        }
    }
    let opts = TextOptions::default();
    for (i, bucket) in buckets.iter().enumerate() {
        let text = render_text(&order_chars(bucket, opts.row_tol), &opts);
        grid.cells[i / cols][i % cols] = text.split_whitespace().collect::<Vec<_>>().join(" ");
    }
}
