//! A small synthetic paper, written as a real PDF.
//!
//! Four pages: an abstract, an experimental page with a ruled table, a
//! conclusion page carrying a vector scheme, an embedded raster, a borderless
//! table and a misspelled key phrase, and a reference list. The end-to-end
//! tests, the benchmark and `examples/make_fixture.rs` all build it from
//! here, so the checked-in copy can always be regenerated.

use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Document, Object, Stream, StringFormat};

use crate::ingest::win_ansi_byte;

pub const PAPER_ID: &str = "synthetic_paper";

const WIDTH: f64 = 612.0;
const HEIGHT: f64 = 792.0;

/// A minimal baseline JPEG header and trailer. Never decoded, only copied.
pub const FAKE_JPEG: [u8; 24] = [
    0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, b'J', b'F', b'I', b'F', 0x00, 0x01, 0x01, 0x00, 0x00, 0x48, 0x00, 0x48, 0x00,
    0x00, 0xAA, 0x55, 0xFF, 0xD9,
];

/// Page drawing in top-left coordinates.
struct Canvas {
    ops: Vec<Operation>,
    image: bool,
}

impl Canvas {
    fn new() -> Self {
        Self {
            ops: Vec::new(),
            image: false,
        }
    }

    fn op(&mut self, name: &str, operands: Vec<Object>) {
        self.ops.push(Operation::new(name, operands));
    }

    fn text(&mut self, x: f64, baseline: f64, size: f64, bold: bool, s: &str) {
        let bytes: Vec<u8> = s
            .chars()
            .map(|c| win_ansi_byte(c).unwrap_or_else(|| panic!("{c:?} has no WinAnsi code")))
            .collect();
        self.op("BT", vec![]);
        self.op("Tf", vec![Object::Name(if bold { b"F2".to_vec() } else { b"F1".to_vec() }), size.into()]);
        self.op(
            "Tm",
            vec![1.into(), 0.into(), 0.into(), 1.into(), x.into(), (HEIGHT - baseline).into()],
        );
        self.op("Tj", vec![Object::String(bytes, StringFormat::Literal)]);
        self.op("ET", vec![]);
    }

    /// Lines of body text, 14 points apart.
    fn para(&mut self, x: f64, first_baseline: f64, lines: &[&str]) {
        for (i, l) in lines.iter().enumerate() {
            self.text(x, first_baseline + 14.0 * i as f64, 10.0, false, l);
        }
    }

    fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        self.op("w", vec![0.5.into()]);
        self.op("m", vec![x0.into(), (HEIGHT - y0).into()]);
        self.op("l", vec![x1.into(), (HEIGHT - y1).into()]);
        self.op("S", vec![]);
    }

    fn rect(&mut self, x: f64, top: f64, w: f64, h: f64) {
        self.op("w", vec![0.8.into()]);
        self.op("re", vec![x.into(), (HEIGHT - top - h).into(), w.into(), h.into()]);
        self.op("S", vec![]);
    }

    fn image(&mut self, x: f64, top: f64, w: f64, h: f64) {
        self.image = true;
        self.op("q", vec![]);
        self.op(
            "cm",
            vec![w.into(), 0.into(), 0.into(), h.into(), x.into(), (HEIGHT - top - h).into()],
        );
        self.op("Do", vec![Object::Name(b"Im1".to_vec())]);
        self.op("Q", vec![]);
    }

    /// A ruled table: every row and column boundary drawn, text inset.
    fn ruled_table(&mut self, xs: &[f64], top: f64, row_h: f64, rows: &[&[&str]]) {
        let bottom = top + row_h * rows.len() as f64;
        for r in 0..=rows.len() {
            let y = top + row_h * r as f64;
            self.line(xs[0], y, xs[xs.len() - 1], y);
        }
        for &x in xs {
            self.line(x, top, x, bottom);
        }
        for (r, row) in rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                self.text(xs[c] + 4.0, top + row_h * r as f64 + 13.0, 10.0, false, cell);
            }
        }
    }
}

fn abstract_page() -> Canvas {
    let mut c = Canvas::new();
    c.text(72.0, 72.0, 14.0, true, "Ligand Effects in Palladium Biaryl Coupling");
    c.text(72.0, 100.0, 12.0, true, "Abstract");
    c.para(
        72.0,
        120.0,
        &[
            "Biaryl esters were prepared from aryl aldehydes and aryl iodides under mild",
            "conditions. The ligand had a strong effect: 3b was obtained in 93% yield.",
        ],
    );
    c
}

fn experimental_page() -> Canvas {
    let mut c = Canvas::new();
    c.text(72.0, 72.0, 12.0, true, "Experimental Section");
    c.text(72.0, 92.0, 10.0, true, "General Procedure");
    c.para(
        72.0,
        110.0,
        &[
            "A mixture of 4-methylbenzaldehyde (1b) and methyl 4-iodobenzoate (2d)",
            "in dry THF was stirred at 60 \u{b0}C for 12 h. Then methyl",
            "4'-methylbiphenyl-4-carboxylate (3b) was isolated by chromatography.",
        ],
    );
    c.para(
        72.0,
        166.0,
        &[
            "Cross-coupling of 1b and 2d afforded 3b in 93% yield (Table 1, entry 2).",
            "Similarly, 1c and 2d gave 3c in 85\u{2013}90% yield in toluene.",
        ],
    );
    c.text(72.0, 214.0, 10.0, false, "Table 1. Ligand and solvent screening.");
    c.ruled_table(
        &[72.0, 112.0, 192.0, 252.0, 312.0, 362.0, 412.0],
        226.0,
        18.0,
        &[
            &["Entry", "Reactants", "Ligand", "Solvent", "Product", "Yield"],
            &["1", "1b + 2d", "PPh3", "DMF", "3b", "41%"],
            &["2", "1b + 2d", "Amphos", "THF", "3b", "93%"],
        ],
    );
    c
}

fn conclusion_page() -> Canvas {
    let mut c = Canvas::new();
    c.text(72.0, 72.0, 12.0, true, "Conclusion");
    c.para(
        72.0,
        92.0,
        &[
            "In summary, the ligand controls the coupling of aryl iodides with",
            "aryl aldehydes. The labels used in this work are shown below.",
        ],
    );
    // Scheme: a framed drawing whose labels contradict the experimental page.
    c.rect(72.0, 140.0, 300.0, 60.0);
    c.text(84.0, 162.0, 10.0, false, "2d = methyl 4-iodobenzoate");
    c.text(84.0, 182.0, 10.0, false, "1b = 4-methylbenzoic acid");
    c.image(400.0, 140.0, 120.0, 80.0);
    c.text(400.0, 236.0, 9.0, false, "Figure 2. Crystal of 3b.");
    c.text(72.0, 256.0, 9.0, false, "Scheme 1. Substrate labels.");
    c.text(72.0, 290.0, 10.0, false, "Table 2. Solvent properties.");
    let rows = [
        ["Solvent", "bp (\u{b0}C)", "Polarity"],
        ["THF", "66", "4.0"],
        ["toluene", "111", "2.4"],
        ["DMF", "153", "6.4"],
    ];
    for (r, row) in rows.iter().enumerate() {
        for (x, cell) in [72.0, 180.0, 260.0].iter().zip(row) {
            c.text(*x, 310.0 + 14.0 * r as f64, 10.0, false, cell);
        }
    }
    c.para(72.0, 390.0, &["The Genera1 Procedure above was used for every entry."]);
    c
}

fn references_page() -> Canvas {
    let mut c = Canvas::new();
    c.text(72.0, 72.0, 12.0, true, "References");
    c.para(
        72.0,
        92.0,
        &[
            "1. A. Author and B. Writer, J. Org. Chem. 2019, 84, 1021.",
            "2. C. Chemist, Org. Lett. 2020, 22, 350.",
        ],
    );
    c
}

/// The fixture paper as PDF bytes. The output is identical on every call.
pub fn paper_pdf() -> Vec<u8> {
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font = |base: &str| {
        dictionary! {
            "Type" => "Font",
            "Subtype" => "Type1",
            "BaseFont" => Object::Name(base.as_bytes().to_vec()),
            "Encoding" => "WinAnsiEncoding",
        }
    };
    let regular = doc.add_object(font("Helvetica"));
    let bold = doc.add_object(font("Helvetica-Bold"));
    let image = doc.add_object(Stream::new(
        dictionary! {
            "Type" => "XObject",
            "Subtype" => "Image",
            "Width" => 8,
            "Height" => 8,
            "ColorSpace" => "DeviceGray",
            "BitsPerComponent" => 8,
            "Filter" => "DCTDecode",
        },
        FAKE_JPEG.to_vec(),
    ));

    let mut kids = Vec::new();
    for canvas in [abstract_page(), experimental_page(), conclusion_page(), references_page()] {
        let mut resources = dictionary! {
            "Font" => dictionary! { "F1" => regular, "F2" => bold },
        };
        if canvas.image {
            resources.set("XObject", dictionary! { "Im1" => image });
        }
        let content = Content { operations: canvas.ops }.encode().expect("content encodes");
        let content_id = doc.add_object(Stream::new(dictionary! {}, content));
        let page = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "MediaBox" => vec![0.into(), 0.into(), WIDTH.into(), HEIGHT.into()],
            "Contents" => content_id,
            "Resources" => resources,
        });
        kids.push(Object::Reference(page));
    }
    let count = kids.len() as i64;
    doc.objects.insert(
        pages_id,
        Object::Dictionary(dictionary! { "Type" => "Pages", "Kids" => kids, "Count" => count }),
    );
    let catalog = doc.add_object(dictionary! { "Type" => "Catalog", "Pages" => pages_id });
    doc.trailer.set("Root", catalog);
    let mut out = Vec::new();
    doc.save_to(&mut out).expect("in-memory write");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{convert_pdf, BuiltinDecoder};

    #[test]
    fn pdf_is_stable_and_decodes() {
        let bytes = paper_pdf();
        assert_eq!(bytes, paper_pdf());
        let doc = convert_pdf(&bytes, PAPER_ID, &BuiltinDecoder).unwrap();
        assert_eq!(doc.pages.len(), 4);
        assert_eq!(doc.pages[2].embedded_images.len(), 1);
        assert!(doc.pages[1].vector_segments.len() >= 10);
    }
}
