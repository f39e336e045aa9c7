//! PDF → [`StructuredDocument`] adapters.
//!
//! Two decoders implement [`PdfDecoder`]:
//!
//! * [`BuiltinDecoder`] walks page content streams with `lopdf` and recovers
//!   positioned glyphs of simple (single-byte) fonts, stroked path segments,
//!   thin filled rules and image XObjects. It targets born-digital papers; it
//!   does not interpret embedded font programs or composite fonts.
//! * [`ExternalDecoder`] runs a user-supplied program that reads PDF bytes on
//!   stdin and prints interchange JSON on stdout. `CHEMMINER_DECODER` selects
//!   it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Arc;

use lopdf::content::Content;
use lopdf::{Dictionary, Document, Object, ObjectId};
use thiserror::Error;

use crate::doc::{
    validate_document, Block, BlockKind, Char, EmbeddedImage, Line, Page, PayloadRef, Span,
    StructuredDocument, VectorSegment, Violation,
};
use crate::geometry::{BBox, Point};

pub const DECODER_ENV: &str = "CHEMMINER_DECODER";

const ASCENT: f64 = 0.75;
const DESCENT: f64 = 0.25;
/// Filled rectangles thinner than this are treated as ruling lines.
const RULE_THICKNESS: f64 = 2.0;
const MAX_FORM_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum ConversionError {
    #[error("cannot decode PDF: {0}")]
    Unreadable(String),
    #[error("PDF is encrypted")]
    Encrypted,
    #[error("no pages")]
    NoPages,
    #[error("external decoder failed: {0}")]
    External(String),
    #[error("decoded document violates the model: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
}

pub trait PdfDecoder: Send + Sync {
    fn decode(&self, pdf_bytes: &[u8], source_id: &str) -> Result<StructuredDocument, ConversionError>;
}

/// Decodes and checks the result against the document invariants.
pub fn convert_pdf(
    pdf_bytes: &[u8],
    source_id: &str,
    decoder: &dyn PdfDecoder,
) -> Result<StructuredDocument, ConversionError> {
    let doc = decoder.decode(pdf_bytes, source_id)?;
    if doc.pages.is_empty() {
        return Err(ConversionError::NoPages);
    }
    let violations = validate_document(&doc);
    if !violations.is_empty() {
        return Err(ConversionError::Invalid(violations));
    }
    Ok(doc)
}

/// The decoder named by `CHEMMINER_DECODER`, or the built-in one.
pub fn decoder_from_env() -> Box<dyn PdfDecoder> {
    match std::env::var_os(DECODER_ENV) {
        Some(p) if !p.is_empty() => Box::new(ExternalDecoder::new(p)),
        _ => Box::new(BuiltinDecoder),
    }
}

#[derive(Clone, Debug)]
pub struct ExternalDecoder {
    program: PathBuf,
}

impl ExternalDecoder {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl PdfDecoder for ExternalDecoder {
    fn decode(&self, pdf_bytes: &[u8], source_id: &str) -> Result<StructuredDocument, ConversionError> {
        let mut child = Command::new(&self.program)
            .arg(source_id)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ConversionError::External(format!("{}: {e}", self.program.display())))?;
        {
            let mut stdin = child.stdin.take().expect("stdin piped");
            // A decoder that exits early closes the pipe; its exit status says why.
            let _ = stdin.write_all(pdf_bytes);
        }
        let out = child
            .wait_with_output()
            .map_err(|e| ConversionError::External(e.to_string()))?;
        if !out.status.success() {
            let diag = String::from_utf8_lossy(&out.stderr).trim().to_string();
            return Err(ConversionError::External(format!("{}: {diag}", out.status)));
        }
        let json = String::from_utf8_lossy(&out.stdout);
        StructuredDocument::from_interchange_json(&json)
            .map_err(|e| ConversionError::External(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuiltinDecoder;

impl PdfDecoder for BuiltinDecoder {
    fn decode(&self, pdf_bytes: &[u8], source_id: &str) -> Result<StructuredDocument, ConversionError> {
        let doc = Document::load_mem(pdf_bytes).map_err(|e| ConversionError::Unreadable(e.to_string()))?;
        if doc.is_encrypted() {
            return Err(ConversionError::Encrypted);
        }
        let page_ids = doc.get_pages();
        if page_ids.is_empty() {
            return Err(ConversionError::NoPages);
        }
        let mut pages = Vec::with_capacity(page_ids.len());
        for (i, (_, id)) in page_ids.iter().enumerate() {
            pages.push(decode_page(&doc, *id, i)?);
        }
        Ok(StructuredDocument::new(source_id, pages))
    }
}

type Matrix = [f64; 6];

const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
        a[4] * b[0] + a[5] * b[2] + b[4],
        a[4] * b[1] + a[5] * b[3] + b[5],
    ]
}

fn apply(m: &Matrix, x: f64, y: f64) -> (f64, f64) {
    (m[0] * x + m[2] * y + m[4], m[1] * x + m[3] * y + m[5])
}

fn x_scale(m: &Matrix) -> f64 {
    m[0].hypot(m[1])
}

fn y_scale(m: &Matrix) -> f64 {
    m[2].hypot(m[3])
}

fn num(o: &Object) -> f64 {
    o.as_float().map(f64::from).unwrap_or(0.0)
}

fn nums<const N: usize>(ops: &[Object]) -> Option<[f64; N]> {
    if ops.len() < N {
        return None;
    }
    let mut out = [0.0; N];
    for (o, v) in out.iter_mut().zip(ops) {
        *o = v.as_float().ok()? as f64;
    }
    Some(out)
}

fn deref<'a>(doc: &'a Document, o: &'a Object) -> &'a Object {
    doc.dereference(o).map(|(_, o)| o).unwrap_or(o)
}

fn dict_get<'a>(doc: &'a Document, d: &'a Dictionary, key: &[u8]) -> Option<&'a Object> {
    d.get(key).ok().map(|o| deref(doc, o))
}

/// Walks the page tree upwards for an inheritable attribute.
fn inherited<'a>(doc: &'a Document, page: ObjectId, key: &[u8]) -> Option<&'a Object> {
    let mut dict = doc.get_dictionary(page).ok()?;
    for _ in 0..32 {
        if let Some(o) = dict_get(doc, dict, key) {
            return Some(o);
        }
        let parent = dict.get(b"Parent").and_then(Object::as_reference).ok()?;
        dict = doc.get_dictionary(parent).ok()?;
    }
    None
}

#[derive(Clone, Debug)]
struct FontInfo {
    base_font: String,
    bold: bool,
    first_char: u32,
    widths: Vec<f64>,
    fallback: WidthTable,
}

#[derive(Clone, Copy, Debug)]
enum WidthTable {
    Helvetica,
    Monospace,
    Flat,
}

impl FontInfo {
    fn from_dict(doc: &Document, d: &Dictionary) -> Self {
        let base_font = dict_get(doc, d, b"BaseFont")
            .and_then(|o| o.as_name().ok())
            .map(|n| String::from_utf8_lossy(n).into_owned())
            .unwrap_or_default();
        let first_char = dict_get(doc, d, b"FirstChar")
            .and_then(|o| o.as_i64().ok())
            .unwrap_or(0)
            .max(0) as u32;
        let widths = dict_get(doc, d, b"Widths")
            .and_then(|o| o.as_array().ok())
            .map(|a| a.iter().map(|w| num(deref(doc, w))).collect())
            .unwrap_or_default();
        let lower = base_font.to_ascii_lowercase();
        let fallback = if lower.contains("courier") || lower.contains("mono") {
            WidthTable::Monospace
        } else if lower.contains("helvetica") || lower.contains("arial") {
            WidthTable::Helvetica
        } else {
            WidthTable::Flat
        };
        let bold = ["bold", "black", "heavy", "semibold"]
            .iter()
            .any(|k| lower.contains(k));
        Self {
            base_font,
            bold,
            first_char,
            widths,
            fallback,
        }
    }

    /// Glyph advance in text-space units (1/1000 em scaled to 1 em).
    fn width(&self, code: u8) -> f64 {
        let c = code as u32;
        if c >= self.first_char {
            if let Some(w) = self.widths.get((c - self.first_char) as usize) {
                return w / 1000.0;
            }
        }
        match self.fallback {
            WidthTable::Helvetica => helvetica_width(code) / 1000.0,
            WidthTable::Monospace => 0.6,
            WidthTable::Flat => 0.5,
        }
    }
}

/// Standard Helvetica advance widths for the printable WinAnsi range.
pub fn helvetica_width(code: u8) -> f64 {
    const ASCII: [u16; 95] = [
        278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333, 278, 278, // ' '..'/'
        556, 556, 556, 556, 556, 556, 556, 556, 556, 556, // 0-9
        278, 278, 584, 584, 584, 556, 1015, // ':'..'@'
        667, 667, 722, 722, 667, 611, 778, 722, 278, 500, 667, 556, 833, 722, 778, 667, 778,
        722, 667, 611, 722, 667, 944, 667, 667, 611, // A-Z
        278, 278, 278, 469, 556, 333, // '['..'`'
        556, 556, 500, 556, 556, 278, 556, 556, 222, 222, 500, 222, 833, 556, 556, 556, 556,
        333, 500, 278, 556, 500, 722, 500, 500, 500, // a-z
        334, 260, 334, 584, // '{'..'~'
    ];
    match code {
        32..=126 => ASCII[(code - 32) as usize] as f64,
        0x91 | 0x92 => 222.0,
        0x93 | 0x94 => 333.0,
        0x96 => 556.0,
        0x97 => 1000.0,
        0xB0 => 400.0,
        0xB1 => 584.0,
        0xB5 => 556.0,
        _ => 556.0,
    }
}

/// WinAnsiEncoding; bytes outside 0x80..=0x9F coincide with Latin-1.
pub fn win_ansi_char(code: u8) -> Option<char> {
    const HIGH: [Option<char>; 32] = [
        Some('€'), None, Some('‚'), Some('ƒ'), Some('„'), Some('…'), Some('†'), Some('‡'),
        Some('ˆ'), Some('‰'), Some('Š'), Some('‹'), Some('Œ'), None, Some('Ž'), None,
        None, Some('‘'), Some('’'), Some('“'), Some('”'), Some('•'), Some('–'), Some('—'),
        Some('˜'), Some('™'), Some('š'), Some('›'), Some('œ'), None, Some('ž'), Some('Ÿ'),
    ];
    match code {
        0x80..=0x9F => HIGH[(code - 0x80) as usize],
        0x00..=0x1F | 0x7F => None,
        _ => Some(code as char),
    }
}

/// Inverse of [`win_ansi_char`] for the characters fixtures need.
pub fn win_ansi_byte(c: char) -> Option<u8> {
    if (c as u32) < 0x80 || ((c as u32) >= 0xA0 && (c as u32) <= 0xFF) {
        return Some(c as u32 as u8);
    }
    (0x80u8..=0x9F).find(|&b| win_ansi_char(b) == Some(c))
}

#[derive(Clone, Debug)]
struct GraphicsState {
    ctm: Matrix,
    line_width: f64,
}

#[derive(Clone, Debug)]
struct TextState {
    font: Option<Arc<FontInfo>>,
    size: f64,
    char_spacing: f64,
    word_spacing: f64,
    h_scale: f64,
    leading: f64,
    rise: f64,
    tm: Matrix,
    tlm: Matrix,
}

impl Default for TextState {
    fn default() -> Self {
        Self {
            font: None,
            size: 0.0,
            char_spacing: 0.0,
            word_spacing: 0.0,
            h_scale: 1.0,
            leading: 0.0,
            rise: 0.0,
            tm: IDENTITY,
            tlm: IDENTITY,
        }
    }
}

/// A run of glyphs from one show-text operator, in PDF user space.
struct RawSpan {
    chars: Vec<RawChar>,
    baseline: f64,
    style: String,
}

struct RawChar {
    glyph: char,
    x0: f64,
    x1: f64,
    baseline: f64,
    size: f64,
    bold: bool,
}

struct PageSink {
    spans: Vec<RawSpan>,
    segments: Vec<(f64, f64, f64, f64, f64)>,
    images: Vec<(Matrix, EmbeddedRaw)>,
}

struct EmbeddedRaw {
    format_tag: String,
    bytes: Vec<u8>,
    pixel_width: f64,
}

struct Interpreter<'a> {
    doc: &'a Document,
    fonts: BTreeMap<(Vec<u8>, usize), Arc<FontInfo>>,
    sink: PageSink,
}

impl<'a> Interpreter<'a> {
    fn run(&mut self, content: &[u8], resources: Option<&'a Dictionary>, ctm: Matrix, depth: usize) {
        let ops = match Content::decode(content) {
            Ok(c) => c.operations,
            Err(e) => {
                log::warn!("skipping undecodable content stream: {e}");
                return;
            }
        };
        let mut gs = GraphicsState {
            ctm,
            line_width: 1.0,
        };
        let mut stack: Vec<GraphicsState> = Vec::new();
        let mut ts = TextState::default();
        let mut path: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut rects: Vec<[f64; 4]> = Vec::new();

        for op in &ops {
            let o = &op.operands;
            match op.operator.as_str() {
                "q" => stack.push(gs.clone()),
                "Q" => {
                    if let Some(s) = stack.pop() {
                        gs = s;
                    }
                }
                "cm" => {
                    if let Some(m) = nums::<6>(o) {
                        gs.ctm = mul(&m, &gs.ctm);
                    }
                }
                "w" => {
                    if let Some([w]) = nums::<1>(o) {
                        gs.line_width = w;
                    }
                }
                "BT" => {
                    ts.tm = IDENTITY;
                    ts.tlm = IDENTITY;
                }
                "Tf" => {
                    if let (Some(name), Some(size)) = (o.first().and_then(|n| n.as_name().ok()), o.get(1)) {
                        ts.font = self.font(resources, name, depth);
                        ts.size = num(size);
                    }
                }
                "Tc" => ts.char_spacing = o.first().map(num).unwrap_or(0.0),
                "Tw" => ts.word_spacing = o.first().map(num).unwrap_or(0.0),
                "Tz" => ts.h_scale = o.first().map(num).unwrap_or(100.0) / 100.0,
                "TL" => ts.leading = o.first().map(num).unwrap_or(0.0),
                "Ts" => ts.rise = o.first().map(num).unwrap_or(0.0),
                "Td" | "TD" => {
                    if let Some([tx, ty]) = nums::<2>(o) {
                        if op.operator == "TD" {
                            ts.leading = -ty;
                        }
                        ts.tlm = mul(&[1.0, 0.0, 0.0, 1.0, tx, ty], &ts.tlm);
                        ts.tm = ts.tlm;
                    }
                }
                "Tm" => {
                    if let Some(m) = nums::<6>(o) {
                        ts.tlm = m;
                        ts.tm = m;
                    }
                }
                "T*" => next_line(&mut ts),
                "Tj" => {
                    if let Some(s) = o.first().and_then(|s| s.as_str().ok()) {
                        self.show(&mut ts, &gs, s);
                    }
                }
                "'" => {
                    next_line(&mut ts);
                    if let Some(s) = o.first().and_then(|s| s.as_str().ok()) {
                        self.show(&mut ts, &gs, s);
                    }
                }
                "\"" => {
                    if let Some([aw, ac]) = nums::<2>(o) {
                        ts.word_spacing = aw;
                        ts.char_spacing = ac;
                    }
                    next_line(&mut ts);
                    if let Some(s) = o.get(2).and_then(|s| s.as_str().ok()) {
                        self.show(&mut ts, &gs, s);
                    }
                }
                "TJ" => {
                    if let Some(arr) = o.first().and_then(|a| a.as_array().ok()) {
                        let mut bytes = Vec::new();
                        let mut spans: Vec<RawSpan> = Vec::new();
                        for item in arr {
                            match item {
                                Object::String(s, _) => bytes.extend_from_slice(s),
                                other => {
                                    if !bytes.is_empty() {
                                        if let Some(span) = self.layout(&mut ts, &gs, &bytes) {
                                            spans.push(span);
                                        }
                                        bytes.clear();
                                    }
                                    let adj = num(other);
                                    let tx = -adj / 1000.0 * ts.size * ts.h_scale;
                                    ts.tm = mul(&[1.0, 0.0, 0.0, 1.0, tx, 0.0], &ts.tm);
                                }
                            }
                        }
                        if !bytes.is_empty() {
                            if let Some(span) = self.layout(&mut ts, &gs, &bytes) {
                                spans.push(span);
                            }
                        }
                        // One TJ is one span even when kerned into pieces.
                        if let Some(mut first) = spans.first_mut().map(|s| std::mem::take(&mut s.chars)) {
                            let (baseline, style) = (spans[0].baseline, spans[0].style.clone());
                            for s in spans.iter_mut().skip(1) {
                                first.append(&mut s.chars);
                            }
                            if !first.is_empty() {
                                self.sink.spans.push(RawSpan {
                                    chars: first,
                                    baseline,
                                    style,
                                });
                            }
                        }
                    }
                }
                "m" => {
                    if let Some([x, y]) = nums::<2>(o) {
                        path.push(vec![apply(&gs.ctm, x, y)]);
                    }
                }
                "l" => {
                    if let (Some([x, y]), Some(sub)) = (nums::<2>(o), path.last_mut()) {
                        sub.push(apply(&gs.ctm, x, y));
                    }
                }
                "c" | "v" | "y" => {
                    // Curves are kept as chords; only their extent matters downstream.
                    let end = match op.operator.as_str() {
                        "c" => nums::<6>(o).map(|v| (v[4], v[5])),
                        _ => nums::<4>(o).map(|v| (v[2], v[3])),
                    };
                    if let (Some((x, y)), Some(sub)) = (end, path.last_mut()) {
                        sub.push(apply(&gs.ctm, x, y));
                    }
                }
                "re" => {
                    if let Some([x, y, w, h]) = nums::<4>(o) {
                        let pts = vec![
                            apply(&gs.ctm, x, y),
                            apply(&gs.ctm, x + w, y),
                            apply(&gs.ctm, x + w, y + h),
                            apply(&gs.ctm, x, y + h),
                            apply(&gs.ctm, x, y),
                        ];
                        let (a, b) = (pts[0], pts[2]);
                        rects.push([a.0.min(b.0), a.1.min(b.1), a.0.max(b.0), a.1.max(b.1)]);
                        path.push(pts);
                    }
                }
                "h" => {
                    if let Some(sub) = path.last_mut() {
                        if let Some(&first) = sub.first() {
                            sub.push(first);
                        }
                    }
                }
                "S" | "s" | "B" | "B*" | "b" | "b*" => {
                    let closing = matches!(op.operator.as_str(), "s" | "b" | "b*");
                    let width = gs.line_width * x_scale(&gs.ctm).max(y_scale(&gs.ctm));
                    for sub in &path {
                        for w in sub.windows(2) {
                            self.push_segment(w[0], w[1], width);
                        }
                        if closing && sub.len() > 2 {
                            self.push_segment(sub[sub.len() - 1], sub[0], width);
                        }
                    }
                    path.clear();
                    rects.clear();
                }
                "f" | "F" | "f*" => {
                    for r in &rects {
                        let (w, h) = (r[2] - r[0], r[3] - r[1]);
                        if h <= RULE_THICKNESS && w > h {
                            let y = (r[1] + r[3]) / 2.0;
                            self.push_segment((r[0], y), (r[2], y), h);
                        } else if w <= RULE_THICKNESS && h > w {
                            let x = (r[0] + r[2]) / 2.0;
                            self.push_segment((x, r[1]), (x, r[3]), w);
                        }
                    }
                    path.clear();
                    rects.clear();
                }
                "n" => {
                    path.clear();
                    rects.clear();
                }
                "Do" => {
                    if let Some(name) = o.first().and_then(|n| n.as_name().ok()) {
                        self.xobject(resources, name, &gs, depth);
                    }
                }
                _ => {}
            }
        }
    }

    fn push_segment(&mut self, a: (f64, f64), b: (f64, f64), width: f64) {
        if a != b {
            self.sink.segments.push((a.0, a.1, b.0, b.1, width));
        }
    }

    fn font(&mut self, resources: Option<&'a Dictionary>, name: &[u8], depth: usize) -> Option<Arc<FontInfo>> {
        let key = (name.to_vec(), depth);
        if let Some(f) = self.fonts.get(&key) {
            return Some(f.clone());
        }
        let fonts = resources.and_then(|r| dict_get(self.doc, r, b"Font"))?.as_dict().ok()?;
        let fd = dict_get(self.doc, fonts, name)?.as_dict().ok()?;
        let info = Arc::new(FontInfo::from_dict(self.doc, fd));
        self.fonts.insert(key, info.clone());
        Some(info)
    }

    fn show(&mut self, ts: &mut TextState, gs: &GraphicsState, bytes: &[u8]) {
        if let Some(span) = self.layout(ts, gs, bytes) {
            self.sink.spans.push(span);
        }
    }

    fn layout(&mut self, ts: &mut TextState, gs: &GraphicsState, bytes: &[u8]) -> Option<RawSpan> {
        let font = ts.font.clone()?;
        let mut chars = Vec::with_capacity(bytes.len());
        let mut baseline = 0.0;
        for &code in bytes {
            let w0 = font.width(code);
            let trm = mul(&[ts.size * ts.h_scale, 0.0, 0.0, ts.size, 0.0, ts.rise], &mul(&ts.tm, &gs.ctm));
            let (ox, oy) = (trm[4], trm[5]);
            let advance_dev = w0 * x_scale(&trm);
            baseline = oy;
            if let Some(glyph) = win_ansi_char(code) {
                chars.push(RawChar {
                    glyph,
                    x0: ox,
                    x1: ox + advance_dev,
                    baseline: oy,
                    size: y_scale(&trm),
                    bold: font.bold,
                });
            }
            let spacing = ts.char_spacing + if code == b' ' { ts.word_spacing } else { 0.0 };
            let tx = (w0 * ts.size + spacing) * ts.h_scale;
            ts.tm = mul(&[1.0, 0.0, 0.0, 1.0, tx, 0.0], &ts.tm);
        }
        if chars.is_empty() {
            return None;
        }
        let size = chars[0].size;
        Some(RawSpan {
            chars,
            baseline,
            style: format!("{}@{}", font.base_font, crate::geometry::round_to(size, 2)),
        })
    }

    fn xobject(&mut self, resources: Option<&'a Dictionary>, name: &[u8], gs: &GraphicsState, depth: usize) {
        let doc = self.doc;
        let Some(xobjects) = resources
            .and_then(|r| dict_get(doc, r, b"XObject"))
            .and_then(|o| o.as_dict().ok())
        else {
            return;
        };
        let Some(stream) = dict_get(doc, xobjects, name).and_then(|o| o.as_stream().ok()) else {
            return;
        };
        let subtype = dict_get(doc, &stream.dict, b"Subtype").and_then(|o| o.as_name().ok());
        match subtype {
            Some(b"Image") => {
                let filters = stream.filters().unwrap_or_default();
                let format_tag = match filters.last().copied() {
                    Some(b"DCTDecode") => "jpeg",
                    Some(b"JPXDecode") => "jp2",
                    Some(b"JBIG2Decode") => "jbig2",
                    Some(b"CCITTFaxDecode") => "ccitt",
                    Some(b"FlateDecode") => "flate",
                    Some(_) => "encoded",
                    None => "raw",
                };
                let pixel_width = dict_get(doc, &stream.dict, b"Width").map(num).unwrap_or(0.0);
                self.sink.images.push((
                    gs.ctm,
                    EmbeddedRaw {
                        format_tag: format_tag.to_string(),
                        bytes: stream.content.clone(),
                        pixel_width,
                    },
                ));
            }
            Some(b"Form") if depth < MAX_FORM_DEPTH => {
                let matrix = dict_get(doc, &stream.dict, b"Matrix")
                    .and_then(|o| o.as_array().ok())
                    .and_then(|a| nums::<6>(a))
                    .unwrap_or(IDENTITY);
                let form_res = dict_get(doc, &stream.dict, b"Resources")
                    .and_then(|o| o.as_dict().ok())
                    .or(resources);
                let content = stream.decompressed_content().unwrap_or_else(|_| stream.content.clone());
                self.run(&content, form_res, mul(&matrix, &gs.ctm), depth + 1);
            }
            _ => {}
        }
    }
}

fn next_line(ts: &mut TextState) {
    ts.tlm = mul(&[1.0, 0.0, 0.0, 1.0, 0.0, -ts.leading], &ts.tlm);
    ts.tm = ts.tlm;
}

fn decode_page(doc: &Document, id: ObjectId, index: usize) -> Result<Page, ConversionError> {
    let media = inherited(doc, id, b"MediaBox")
        .and_then(|o| o.as_array().ok())
        .and_then(|a| nums::<4>(a))
        .unwrap_or([0.0, 0.0, 612.0, 792.0]);
    let (mx, my) = (media[0].min(media[2]), media[1].min(media[3]));
    let width = (media[2] - media[0]).abs();
    let height = (media[3] - media[1]).abs();
    let resources = inherited(doc, id, b"Resources").and_then(|o| o.as_dict().ok());
    let content = doc.get_page_content(id);

    let mut interp = Interpreter {
        doc,
        fonts: BTreeMap::new(),
        sink: PageSink {
            spans: Vec::new(),
            segments: Vec::new(),
            images: Vec::new(),
        },
    };
    interp.run(&content, resources, IDENTITY, 0);
    let sink = interp.sink;

    let bounds = BBox::new(0.0, 0.0, width, height);
    let to_page = |x: f64, y: f64| Point::new(x - mx, height - (y - my));
    let clip = |b: BBox| b.intersection(&bounds);

    let mut page = Page::new(index, width, height);

    let mut spans: Vec<(f64, f64, Span)> = Vec::new(); // (baseline, x0, span)
    for raw in sink.spans {
        let chars: Vec<Char> = raw
            .chars
            .iter()
            .filter_map(|c| {
                let top = to_page(c.x0, c.baseline + ASCENT * c.size);
                let bottom = to_page(c.x1, c.baseline - DESCENT * c.size);
                let bbox = clip(BBox::new(top.x, top.y, bottom.x, bottom.y))?;
                Some(Char {
                    glyph: c.glyph.to_string(),
                    bbox,
                    font_size: c.size,
                    bold: c.bold,
                })
            })
            .collect();
        if chars.is_empty() {
            continue;
        }
        let baseline = to_page(0.0, raw.baseline).y;
        let x0 = chars[0].bbox.x0;
        spans.push((baseline, x0, Span { chars, style: raw.style }));
    }
    page.blocks = assemble_blocks(spans);

    for (x0, y0, x1, y1, w) in sink.segments {
        let (a, b) = (to_page(x0, y0), to_page(x1, y1));
        let clipped = |p: Point| Point::new(p.x.clamp(0.0, width), p.y.clamp(0.0, height));
        let (a, b) = (clipped(a), clipped(b));
        if a != b {
            page.vector_segments.push(VectorSegment::new(a, b, w));
        }
    }

    for (ctm, raw) in sink.images {
        let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(u, v)| {
            let (x, y) = apply(&ctm, u, v);
            to_page(x, y)
        });
        let bbox = BBox::new(
            corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
            corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
            corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
        );
        let Some(bbox) = clip(bbox) else { continue };
        let inches = bbox.width() / 72.0;
        let resolution = if inches > 0.0 && raw.pixel_width > 0.0 {
            crate::geometry::round_to(raw.pixel_width / inches, 3)
        } else {
            72.0
        };
        page.embedded_images.push(EmbeddedImage {
            bbox,
            format_tag: raw.format_tag,
            payload_ref: PayloadRef::Inline(Arc::from(raw.bytes)),
            resolution,
        });
    }
    Ok(page)
}

/// Groups spans sharing a baseline into lines and vertically adjacent,
/// horizontally overlapping lines into blocks.
fn assemble_blocks(mut spans: Vec<(f64, f64, Span)>) -> Vec<Block> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut lines: Vec<(f64, Line)> = Vec::new();
    for (baseline, _, span) in spans {
        let size = span.chars[0].font_size;
        match lines.last_mut() {
            Some((b, line)) if (baseline - *b).abs() <= 0.25 * size => line.spans.push(span),
            _ => lines.push((
                baseline,
                Line {
                    spans: vec![span],
                    baseline_y: baseline,
                },
            )),
        }
    }
    let mut blocks: Vec<Block> = Vec::new();
    let mut prev: Option<(f64, BBox, f64)> = None; // (baseline, extent, font size)
    for (baseline, line) in lines {
        let extent = line.bbox().expect("line has chars");
        let size = line.chars().map(|c| c.font_size).fold(0.0, f64::max);
        let joins = prev.is_some_and(|(pb, pe, ps)| {
            baseline - pb <= 1.6 * ps.max(size) && extent.x0 <= pe.x1 && pe.x0 <= extent.x1
        });
        if joins {
            blocks.last_mut().expect("block exists").lines.push(line);
        } else {
            blocks.push(Block {
                lines: vec![line],
                kind: BlockKind::Text,
            });
        }
        prev = Some((baseline, extent, size));
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn win_ansi_round_trips_en_dash_and_degree() {
        for c in ['–', '°', 'a', '’'] {
            let b = win_ansi_byte(c).unwrap();
            assert_eq!(win_ansi_char(b), Some(c));
        }
    }

    #[test]
    fn matrix_product_composes_translations() {
        let a = [1.0, 0.0, 0.0, 1.0, 5.0, 0.0];
        let b = [2.0, 0.0, 0.0, 2.0, 0.0, 10.0];
        assert_eq!(apply(&mul(&a, &b), 1.0, 1.0), (12.0, 12.0));
    }

    #[test]
    fn garbage_bytes_are_unreadable() {
        let err = convert_pdf(b"definitely not a pdf", "x", &BuiltinDecoder).unwrap_err();
        assert!(matches!(err, ConversionError::Unreadable(_)), "{err}");
    }
}
