//! Document ingestion: PDF decoding, the OCR key-phrase gate and the
//! technical-section classifier.

mod ocr;
pub mod pdf;
mod section;

pub use ocr::{ocr_quality_gate, OcrGateConfig, OcrStatus, OcrVerdict, PhraseEvidence};
pub use pdf::{
    convert_pdf, decoder_from_env, helvetica_width, win_ansi_byte, win_ansi_char, BuiltinDecoder, ConversionError,
    ExternalDecoder, PdfDecoder, DECODER_ENV,
};
pub use section::{classify_section, SectionCues, SectionKind};
