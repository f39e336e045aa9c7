//! Regenerates the checked-in fixture paper: the PDF and its decoded
//! interchange JSON. The golden reactions file is written by hand and is
//! not touched here.
//!
//! cargo run -p chemminer-core --example make_fixture [out_dir]

use std::path::PathBuf;

use chemminer_core::fixture::{paper_pdf, PAPER_ID};
use chemminer_core::ingest::{convert_pdf, BuiltinDecoder};

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"));
    std::fs::create_dir_all(&dir)?;
    let pdf = paper_pdf();
    let doc = convert_pdf(&pdf, PAPER_ID, &BuiltinDecoder).expect("fixture decodes");
    std::fs::write(dir.join(format!("{PAPER_ID}.pdf")), &pdf)?;
    std::fs::write(dir.join(format!("{PAPER_ID}.json")), doc.to_interchange_json())?;
    println!("wrote {}", dir.display());
    Ok(())
}
