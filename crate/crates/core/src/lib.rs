//! Reaction mining from chemistry papers.
//!
//! The crate is organised the way a document flows through the pipeline:
//!
//! * [`doc`] – the five-level geometric document model (pages, blocks, lines,
//!   spans, characters), its JSON interchange form and reading order.
//! * [`ingest`] – PDF decoding adapters, the OCR key-phrase quality gate and
//!   the technical-section classifier.
//! * [`tables`] – bordered and borderless table detection, cell filling and
//!   cross-page merging.
//! * [`figures`] – embedded raster passthrough and vector-figure render specs.
//! * [`coref`] – coreference label validation and the shared label→molecule
//!   dictionary with conflict tracking.
//! * [`agents`] – extraction backends, prompt templates, response parsing and
//!   the three extraction agents.
//! * [`reactions`] – coreference substitution and the output record format.
//! * [`eval`] – matching against annotated ground truth and the metric suite.
//! * [`pipeline`] – configuration and end-to-end orchestration.

pub mod agents;
pub mod config;
pub mod coref;
pub mod doc;
pub mod eval;
pub mod fixture;
pub mod figures;
pub mod geometry;
pub mod ingest;
pub mod par;
pub mod pipeline;
pub mod reactions;
pub mod tables;

pub use config::PipelineConfig;
pub use doc::{Page, StructuredDocument};
pub use geometry::{BBox, Point};
pub use par::Executor;
