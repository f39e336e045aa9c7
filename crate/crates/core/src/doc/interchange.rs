//! Versioned JSON interchange form of [`StructuredDocument`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{Page, PayloadRef, StructuredDocument};

pub const INTERCHANGE_VERSION: u32 = 1;

const INLINE_PREFIX: &str = "base64:";

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("interchange JSON is malformed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported interchange version {found} (expected {INTERCHANGE_VERSION})")]
    Version { found: u32 },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct InterchangeFile {
    version: u32,
    source_id: String,
    pages: Vec<Page>,
}

impl Serialize for PayloadRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PayloadRef::Inline(bytes) => {
                s.serialize_str(&format!("{INLINE_PREFIX}{}", B64.encode(bytes)))
            }
            PayloadRef::External(path) => s.serialize_str(path),
        }
    }
}

impl<'de> Deserialize<'de> for PayloadRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        match raw.strip_prefix(INLINE_PREFIX) {
            Some(data) => B64
                .decode(data)
                .map(|b| PayloadRef::Inline(Arc::from(b)))
                .map_err(D::Error::custom),
            None => Ok(PayloadRef::External(raw)),
        }
    }
}

impl StructuredDocument {
    pub fn to_interchange_json(&self) -> String {
        let file = InterchangeFile {
            version: INTERCHANGE_VERSION,
            source_id: self.source_id.clone(),
            pages: self.pages.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("document serializes");
        out.push('\n');
        out
    }

    pub fn from_interchange_json(json: &str) -> Result<Self, InterchangeError> {
        let file: InterchangeFile = serde_json::from_str(json)?;
        if file.version != INTERCHANGE_VERSION {
            return Err(InterchangeError::Version {
                found: file.version,
            });
        }
        Ok(StructuredDocument {
            source_id: file.source_id,
            pages: file.pages,
        })
    }

    /// Loads an interchange file and inlines every external image payload,
    /// resolving relative references against the file's directory.
    pub fn from_interchange_path(path: &Path) -> Result<Self, InterchangeError> {
        let json = fs::read_to_string(path).map_err(|source| InterchangeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut doc = Self::from_interchange_json(&json)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        doc.resolve_payloads(base)?;
        Ok(doc)
    }

    pub fn resolve_payloads(&mut self, base: &Path) -> Result<(), InterchangeError> {
        for page in &mut self.pages {
            for img in &mut page.embedded_images {
                if let PayloadRef::External(rel) = &img.payload_ref {
                    let p = base.join(rel);
                    let bytes = fs::read(&p).map_err(|source| InterchangeError::Io {
                        path: p.clone(),
                        source,
                    })?;
                    img.payload_ref = PayloadRef::Inline(Arc::from(bytes));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{EmbeddedImage, PageBuilder};
    use crate::geometry::BBox;

    fn sample() -> StructuredDocument {
        let page = PageBuilder::new(0, 612.0, 792.0)
            .text(72.0, 100.0, "General Procedure", 10.0, 5.0)
            .segment(72.0, 200.0, 300.0, 200.0)
            .image(EmbeddedImage {
                bbox: BBox::new(100.0, 300.0, 200.0, 400.0),
                format_tag: "jpeg".into(),
                payload_ref: PayloadRef::inline(vec![0xFF, 0xD8, 0xFF, 0xD9]),
                resolution: 72.0,
            })
            .build();
        StructuredDocument::new("sample", vec![page])
    }

    #[test]
    fn top_level_shape_is_versioned() {
        let v: serde_json::Value = serde_json::from_str(&sample().to_interchange_json()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["source_id"], "sample");
        let page = &v["pages"][0];
        for key in ["index", "width", "height", "blocks", "vector_segments", "embedded_images"] {
            assert!(page.get(key).is_some(), "missing {key}");
        }
        assert!(page["embedded_images"][0]["payload_ref"]
            .as_str()
            .unwrap()
            .starts_with("base64:"));
    }

    #[test]
    fn round_trips() {
        let doc = sample();
        let back = StructuredDocument::from_interchange_json(&doc.to_interchange_json()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let json = sample().to_interchange_json().replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            StructuredDocument::from_interchange_json(&json),
            Err(InterchangeError::Version { found: 7 })
        ));
    }

    #[test]
    fn external_payloads_resolve_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("img0.jpg"), [1u8, 2, 3]).unwrap();
        let mut doc = sample();
        doc.pages[0].embedded_images[0].payload_ref = PayloadRef::External("img0.jpg".into());
        let path = dir.path().join("doc.json");
        std::fs::write(&path, doc.to_interchange_json()).unwrap();
        let loaded = StructuredDocument::from_interchange_path(&path).unwrap();
        assert_eq!(
            loaded.pages[0].embedded_images[0].payload_ref.bytes(),
            Some(&[1u8, 2, 3][..])
        );
    }
}
