
use serde::{Deserialize, Serialize};

use super::{Char, Page};

/// Characters of one page in natural reading order, with the row each one
/// was bucketed into.
#[derive(Clone, Debug)]
pub struct ReadingOrder<'a> {
    pub chars: Vec<&'a Char>,
    pub rows: Vec<usize>,
}

/// Sorts the page's characters top-to-bottom, then left-to-right.
///
/// Characters whose vertical centers are chained within `row_tol` of each
/// other share a row bucket; the sort key is `(row_bucket, x0, input_index)`.
pub fn reading_order(page: &Page, row_tol: f64) -> ReadingOrder<'_> {
    let chars: Vec<&Char> = page.chars().collect();
    order_chars(&chars, row_tol)
}

pub(crate) fn order_chars<'a>(chars: &[&'a Char], row_tol: f64) -> ReadingOrder<'a> {
    let buckets = row_buckets(chars, row_tol);
    let mut idx: Vec<usize> = (0..chars.len()).collect();
    idx.sort_by(|&a, &b| {
        buckets[a]
            .cmp(&buckets[b])
            .then_with(|| chars[a].bbox.x0.total_cmp(&chars[b].bbox.x0))
            .then_with(|| a.cmp(&b))
    });
    ReadingOrder {
        chars: idx.iter().map(|&i| chars[i]).collect(),
        rows: idx.iter().map(|&i| buckets[i]).collect(),
    }
}

fn row_buckets(chars: &[&Char], row_tol: f64) -> Vec<usize> {
    let centers: Vec<f64> = chars.iter().map(|c| c.bbox.center().y).collect();
    let mut by_y: Vec<usize> = (0..chars.len()).collect();
    by_y.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut buckets = vec![0; chars.len()];
    let mut bucket = 0;
    for w in 0..by_y.len() {
        if w > 0 && centers[by_y[w]] - centers[by_y[w - 1]] > row_tol {
            bucket += 1;
        }
        buckets[by_y[w]] = bucket;
    }
    buckets
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextOptions {
    pub row_tol: f64,
    /// Horizontal gap, in ems of the left glyph, that separates two words.
    pub word_gap_em: f64,
    /// Vertical gap between rows, relative to the upper row's height, that
    /// starts a new paragraph (rendered as a blank line).
    pub paragraph_gap: f64,
}

impl Default for TextOptions {
    fn default() -> Self {
        Self {
            row_tol: 2.0,
            word_gap_em: 0.2,
            paragraph_gap: 0.8,
        }
    }
}

/// Renders ordered characters as plain text: rows become lines, wide gaps
/// and whitespace glyphs become single spaces, tall vertical gaps become
/// blank lines.
pub fn render_text(order: &ReadingOrder<'_>, opts: &TextOptions) -> String {
    let mut out = String::new();
    let mut i = 0;
    let mut prev_row: Option<(f64, f64)> = None; // (bottom, height)
    while i < order.chars.len() {
        let row = order.rows[i];
        let mut j = i;
        while j < order.chars.len() && order.rows[j] == row {
            j += 1;
        }
        let line = render_row(&order.chars[i..j], opts);
        let top = order.chars[i..j]
            .iter()
            .map(|c| c.bbox.y0)
            .min_by(|a, b| a.total_cmp(b))
            .unwrap_or(0.0);
        let bottom = order.chars[i..j]
            .iter()
            .map(|c| c.bbox.y1)
            .max_by(|a, b| a.total_cmp(b))
            .unwrap_or(0.0);
        if !line.is_empty() {
            if let Some((prev_bottom, prev_height)) = prev_row {
                out.push('\n');
                if top - prev_bottom > opts.paragraph_gap * prev_height {
                    out.push('\n');
                }
            }
            out.push_str(&line);
            prev_row = Some((bottom, bottom - top));
        }
        i = j;
    }
    out
}

fn render_row(chars: &[&Char], opts: &TextOptions) -> String {
    let mut line = String::new();
    let mut pending_space = false;
    let mut prev: Option<&Char> = None;
    for ch in chars {
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        if let Some(p) = prev {
            let gap = ch.bbox.x0 - p.bbox.x1;
            if gap > opts.word_gap_em * p.font_size {
                pending_space = true;
            }
        }
        if pending_space && !line.is_empty() {
            line.push(' ');
        }
        pending_space = false;
        line.push_str(&ch.glyph);
        prev = Some(ch);
    }
    line
}
