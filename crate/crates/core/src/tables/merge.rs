use super::{TableConfig, TableGrid};
use crate::doc::StructuredDocument;

struct Chain {
    table: TableGrid,
    /// Page and page-local geometry of the most recently appended segment.
    last_page: usize,
    last_bottom: f64,
    last_cols: Vec<f64>,
    /// Offset of `last_page` relative to the chain's first page.
    last_offset: f64,
}

fn page_height(doc: &StructuredDocument, page: usize) -> Option<f64> {
    doc.pages.get(page).map(|p| p.height)
}

fn continues(chain: &Chain, t: &TableGrid, doc: &StructuredDocument, cfg: &TableConfig) -> bool {
    let page = t.page_range.0;
    let Some(prev_height) = page_height(doc, chain.last_page) else {
        return false;
    };
    chain.last_page + 1 == page
        && chain.last_bottom >= prev_height - cfg.bottom_margin
        && t.row_boundaries[0] <= cfg.top_margin
        && chain.last_cols.len() == t.col_boundaries.len()
        && chain
            .last_cols
            .iter()
            .zip(&t.col_boundaries)
            .all(|(a, b)| (a - b).abs() <= cfg.col_match_tol)
}

/// Joins table segments that continue across consecutive pages.
///
/// Input order does not matter: tables are sorted by (page, top, left) first.
/// A segment is appended to the chain whose latest segment sits at the bottom
/// of the previous page, has the same column count and matching column
/// boundaries; chains extend transitively over any number of pages.
pub fn merge_cross_page(tables: Vec<TableGrid>, doc: &StructuredDocument, cfg: &TableConfig) -> Vec<TableGrid> {
    let mut tables = tables;
    tables.sort_by(|a, b| {
        a.page_range
            .0
            .cmp(&b.page_range.0)
            .then(a.row_boundaries[0].total_cmp(&b.row_boundaries[0]))
            .then(a.col_boundaries[0].total_cmp(&b.col_boundaries[0]))
    });

    let mut chains: Vec<Chain> = Vec::new();
    for t in tables {
        let candidate = chains
            .iter_mut()
            .filter(|c| continues(c, &t, doc, cfg))
            // Prefer the segment nearest the page bottom.
            .max_by(|a, b| a.last_bottom.total_cmp(&b.last_bottom));
        match candidate {
            Some(chain) => {
                let offset = chain.last_offset + page_height(doc, chain.last_page).unwrap_or(0.0);
                let page = t.page_range.0;
                chain.last_bottom = *t.row_boundaries.last().expect("boundaries");
                chain.last_cols = t.col_boundaries.clone();
                chain.last_page = page;
                chain.last_offset = offset;
                chain.table.page_range.1 = page;
                chain
                    .table
                    .row_boundaries
                    .extend(t.row_boundaries.iter().skip(1).map(|y| y + offset));
                chain.table.cells.extend(t.cells);
            }
            None => chains.push(Chain {
                last_page: t.page_range.0,
                last_bottom: *t.row_boundaries.last().expect("boundaries"),
                last_cols: t.col_boundaries.clone(),
                last_offset: 0.0,
                table: t,
            }),
        }
    }
    chains.into_iter().map(|c| c.table).collect()
}
