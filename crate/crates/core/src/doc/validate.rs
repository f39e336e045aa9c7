use std::fmt;

use serde::Serialize;

use super::{PayloadRef, StructuredDocument};
use crate::geometry::BBox;

/// Child boxes may overhang the page by this much.
const BOUNDS_TOL: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Collects every invariant violation in the document. Never stops early.
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_document(doc: &StructuredDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: &str| {
        out.push(Violation {
            path,
            message: message.to_string(),
        })
    };

    if doc.pages.iter().enumerate().any(|(i, p)| p.index != i) {
        push(String::new(), "non-contiguous page indices");
    }

    for (pi, page) in doc.pages.iter().enumerate() {
        let pp = format!("page[{pi}]");
        if !(page.width.is_finite() && page.height.is_finite() && page.width > 0.0 && page.height > 0.0) {
            push(pp.clone(), "page size must be positive and finite");
        }
        let bounds = page.bounds();
        let check_box = |b: &BBox| -> Option<&'static str> {
            if !b.is_well_formed() {
                Some("malformed bbox (need x0 <= x1, y0 <= y1, finite)")
            } else if !b.within(&bounds, BOUNDS_TOL) {
                Some("bbox outside page bounds")
            } else {
                None
            }
        };

        for (bi, block) in page.blocks.iter().enumerate() {
            let bp = format!("{pp}.block[{bi}]");
            if block.lines.is_empty() {
                push(bp.clone(), "empty container");
            }
            for (li, line) in block.lines.iter().enumerate() {
                let lp = format!("{bp}.line[{li}]");
                if line.spans.is_empty() {
                    push(lp.clone(), "empty container");
                }
                for (si, span) in line.spans.iter().enumerate() {
                    let sp = format!("{lp}.span[{si}]");
                    if span.chars.is_empty() {
                        push(sp.clone(), "empty container");
                    }
                    for (ci, ch) in span.chars.iter().enumerate() {
                        let cp = format!("{sp}.char[{ci}]");
                        if ch.glyph.is_empty() {
                            push(cp.clone(), "empty glyph");
                        }
                        if !(ch.font_size > 0.0) {
                            push(cp.clone(), "font_size must be positive");
                        }
                        if let Some(msg) = check_box(&ch.bbox) {
                            push(cp, msg);
                        }
                    }
                }
                if let Some(lb) = line.bbox() {
                    if line.baseline_y < lb.y0 - 1e-6 || line.baseline_y > lb.y1 + 1e-6 {
                        push(lp, "baseline_y outside the line's vertical extent");
                    }
                }
            }
        }

        for (gi, seg) in page.vector_segments.iter().enumerate() {
            let gp = format!("{pp}.vector_segment[{gi}]");
            if seg.p0 == seg.p1 {
                push(gp.clone(), "degenerate segment (p0 == p1)");
            }
            if !(seg.stroke_width >= 0.0) {
                push(gp.clone(), "stroke_width must be non-negative");
            }
            if let Some(msg) = check_box(&seg.bbox()) {
                push(gp, msg);
            }
        }

        for (ii, img) in page.embedded_images.iter().enumerate() {
            let ip = format!("{pp}.embedded_image[{ii}]");
            if let Some(msg) = check_box(&img.bbox) {
                push(ip.clone(), msg);
            }
            if let PayloadRef::External(r) = &img.payload_ref {
                push(ip.clone(), &format!("payload_ref {r:?} is not resolved"));
            }
            if !(img.resolution > 0.0) {
                push(ip, "resolution must be positive");
            }
        }
    }
    out
}
