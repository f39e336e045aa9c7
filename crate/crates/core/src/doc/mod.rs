//! Structured document model shared by every pipeline stage.
//!
//! A document is a list of pages; each page holds text blocks (block → line →
//! span → char), the stroked vector segments drawn on it and its embedded
//! raster images. Everything is in points with the origin at the top-left
//! corner of the page and y growing downward.

mod interchange;
mod reading;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Point};

pub use interchange::{InterchangeError, INTERCHANGE_VERSION};
pub use reading::{reading_order, render_text, ReadingOrder, TextOptions};
pub(crate) use reading::order_chars;
pub use validate::{validate_document, Violation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Char {
    pub glyph: String,
    pub bbox: BBox,
    pub font_size: f64,
    #[serde(default)]
    pub bold: bool,
}

impl Char {
    pub fn new(glyph: impl Into<String>, bbox: BBox, font_size: f64) -> Self {
        Self {
            glyph: glyph.into(),
            bbox,
            font_size,
            bold: false,
        }
    }

    pub fn is_whitespace(&self) -> bool {
        self.glyph.chars().all(char::is_whitespace)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub chars: Vec<Char>,
    #[serde(default)]
    pub style: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub spans: Vec<Span>,
    pub baseline_y: f64,
}

impl Line {
    pub fn chars(&self) -> impl Iterator<Item = &Char> {
        self.spans.iter().flat_map(|s| s.chars.iter())
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::enclosing(self.chars().map(|c| &c.bbox))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    #[default]
    Text,
    FigureRegion,
    TableCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub lines: Vec<Line>,
    #[serde(default)]
    pub kind: BlockKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorSegment {
    pub p0: Point,
    pub p1: Point,
    pub stroke_width: f64,
}

impl VectorSegment {
    pub fn new(p0: Point, p1: Point, stroke_width: f64) -> Self {
        Self {
            p0,
            p1,
            stroke_width,
        }
    }

    /// `None` for diagonal segments, which table detection ignores.
    pub fn orientation(&self, axis_tol: f64) -> Option<Orientation> {
        let dx = (self.p0.x - self.p1.x).abs();
        let dy = (self.p0.y - self.p1.y).abs();
        if dy <= axis_tol && dx > dy {
            Some(Orientation::Horizontal)
        } else if dx <= axis_tol && dy > dx {
            Some(Orientation::Vertical)
        } else {
            None
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.p0.x.min(self.p1.x),
            self.p0.y.min(self.p1.y),
            self.p0.x.max(self.p1.x),
            self.p0.y.max(self.p1.y),
        )
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.p0.translate(dx, dy), self.p1.translate(dx, dy), self.stroke_width)
    }
}

/// Handle to the bytes of an embedded image.
///
/// In memory the bytes are normally held inline. A reference read from an
/// interchange file may point at a sibling file instead; loading through
/// [`StructuredDocument::from_interchange_path`] resolves those eagerly.
#[derive(Clone, PartialEq, Eq)]
pub enum PayloadRef {
    Inline(Arc<[u8]>),
    External(String),
}

impl PayloadRef {
    pub fn inline(bytes: impl Into<Arc<[u8]>>) -> Self {
        PayloadRef::Inline(bytes.into())
    }

    pub fn bytes(&self) -> Option<&[u8]> {
        match self {
            PayloadRef::Inline(b) => Some(b),
            PayloadRef::External(_) => None,
        }
    }
}

impl fmt::Debug for PayloadRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayloadRef::Inline(b) => write!(f, "Inline({} bytes)", b.len()),
            PayloadRef::External(p) => write!(f, "External({p:?})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedImage {
    pub bbox: BBox,
    pub format_tag: String,
    pub payload_ref: PayloadRef,
    pub resolution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub index: usize,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub blocks: Vec<Block>,
    #[serde(default)]
    pub vector_segments: Vec<VectorSegment>,
    #[serde(default)]
    pub embedded_images: Vec<EmbeddedImage>,
}

impl Page {
    pub fn new(index: usize, width: f64, height: f64) -> Self {
        Self {
            index,
            width,
            height,
            blocks: Vec::new(),
            vector_segments: Vec::new(),
            embedded_images: Vec::new(),
        }
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width, self.height)
    }

    /// All characters in storage order (block, line, span, char). The position
    /// in this sequence is the "input index" used to break reading-order ties.
    pub fn chars(&self) -> impl Iterator<Item = &Char> {
        self.lines().flat_map(|l| l.chars())
    }

    pub fn lines(&self) -> impl Iterator<Item = &Line> {
        self.blocks.iter().flat_map(|b| b.lines.iter())
    }

    /// Copy of the page with all content shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Page {
        let mut page = self.clone();
        page.width += dx.max(0.0);
        page.height += dy.max(0.0);
        for block in &mut page.blocks {
            for line in &mut block.lines {
                line.baseline_y += dy;
                for span in &mut line.spans {
                    for ch in &mut span.chars {
                        ch.bbox = ch.bbox.translate(dx, dy);
                    }
                }
            }
        }
        for seg in &mut page.vector_segments {
            *seg = seg.translate(dx, dy);
        }
        for img in &mut page.embedded_images {
            img.bbox = img.bbox.translate(dx, dy);
        }
        page
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredDocument {
    pub source_id: String,
    pub pages: Vec<Page>,
}

impl StructuredDocument {
    pub fn new(source_id: impl Into<String>, pages: Vec<Page>) -> Self {
        Self {
            source_id: source_id.into(),
            pages,
        }
    }
}

/// Convenience builder for hand-made pages, mostly used by tests and fixtures.
#[derive(Debug)]
pub struct PageBuilder {
    page: Page,
}

impl PageBuilder {
    pub fn new(index: usize, width: f64, height: f64) -> Self {
        Self {
            page: Page::new(index, width, height),
        }
    }

    /// Adds a one-line text block starting at `(x, baseline)` using a
    /// fixed-pitch approximation (`advance` points per glyph, spaces included).
    pub fn text(mut self, x: f64, baseline: f64, text: &str, font_size: f64, advance: f64) -> Self {
        let line = fixed_pitch_line(x, baseline, text, font_size, advance);
        self.page.blocks.push(Block {
            lines: vec![line],
            kind: BlockKind::Text,
        });
        self
    }

    pub fn segment(mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        self.page
            .vector_segments
            .push(VectorSegment::new(Point::new(x0, y0), Point::new(x1, y1), 0.5));
        self
    }

    pub fn image(mut self, image: EmbeddedImage) -> Self {
        self.page.embedded_images.push(image);
        self
    }

    pub fn build(self) -> Page {
        self.page
    }
}

/// One line of fixed-pitch glyphs. Whitespace produces no char but still
/// advances the pen.
pub fn fixed_pitch_line(x: f64, baseline: f64, text: &str, font_size: f64, advance: f64) -> Line {
    let ascent = 0.75 * font_size;
    let descent = 0.25 * font_size;
    let mut chars = Vec::new();
    for (i, g) in text.chars().enumerate() {
        if g.is_whitespace() {
            continue;
        }
        let x0 = x + i as f64 * advance;
        chars.push(Char::new(
            g.to_string(),
            BBox::new(x0, baseline - ascent, x0 + advance, baseline + descent),
            font_size,
        ));
    }
    Line {
        spans: vec![Span {
            chars,
            style: String::new(),
        }],
        baseline_y: baseline,
    }
}
