//! End-to-end orchestration.
//!
//! Per document: ingest, page analysis (reading order, OCR gate, section,
//! tables, figures), Agents I and II, revisits, Agent III, substitution and
//! emission. Documents run concurrently; inside a document, backend calls
//! for pages and assets run concurrently and their results are committed to
//! the dictionary in a fixed order, so outputs never depend on scheduling.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::agents::{
    ask_revisit, bold_tokens, commit, extract_agent1_page, extract_figure, extract_table, run_agent3_document,
    AgentError, DocText, ExtractionBackend, PairDecision, PairOutcome, TemplateSet,
};
use crate::config::PipelineConfig;
use crate::coref::{CorefDictionary, ResolutionReport, SharedDictionary};
use crate::doc::{order_chars, reading_order, render_text, validate_document, Page, StructuredDocument};
use crate::eval::{write_timing, TimingRow};
use crate::figures::{extract_figures, write_assets, FigureAsset};
use crate::ingest::{
    classify_section, convert_pdf, ocr_quality_gate, BuiltinDecoder, ExternalDecoder, OcrStatus, OcrVerdict,
    PdfDecoder, SectionKind,
};
use crate::par::Executor;
use crate::reactions::{substitute_all, to_canonical_json, ReactionRecord};
use crate::tables::{detect_tables, merge_cross_page, write_table_dump, TableGrid};
use crate::BBox;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("{0}")]
    Conversion(#[from] crate::ingest::ConversionError),
    #[error("{0}")]
    Interchange(#[from] crate::doc::InterchangeError),
    #[error("document violates the model: {0}")]
    Invalid(String),
    #[error("unsupported input {0} (expected .pdf or .json)")]
    Unsupported(String),
    #[error("writing outputs: {0}")]
    Io(#[from] io::Error),
}

/// Input files under `paths`: files as given, directories scanned one level
/// deep for `.pdf` and `.json`, all sorted.
pub fn discover_inputs(paths: &[PathBuf]) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in std::fs::read_dir(p)? {
                let path = entry?.path();
                let ext = path.extension().and_then(|e| e.to_str()).map(str::to_lowercase);
                if path.is_file() && matches!(ext.as_deref(), Some("pdf" | "json")) {
                    out.push(path);
                }
            }
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("{}: no such file", p.display())));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn paper_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "paper".into())
}

pub fn decoder_for(cfg: &PipelineConfig) -> Box<dyn PdfDecoder> {
    match &cfg.decoder {
        Some(p) => Box::new(ExternalDecoder::new(p)),
        None => Box::new(BuiltinDecoder),
    }
}

/// Reads a PDF through `decoder` or an interchange JSON file directly.
pub fn load_document(path: &Path, decoder: &dyn PdfDecoder) -> Result<StructuredDocument, DocumentError> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_lowercase);
    match ext.as_deref() {
        Some("pdf") => {
            let bytes = std::fs::read(path)?;
            Ok(convert_pdf(&bytes, &paper_id_of(path), decoder)?)
        }
        Some("json") => {
            let doc = StructuredDocument::from_interchange_path(path)?;
            match validate_document(&doc).first() {
                Some(v) => Err(DocumentError::Invalid(v.to_string())),
                None => Ok(doc),
            }
        }
        _ => Err(DocumentError::Unsupported(path.display().to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PageFlags {
    pub page_index: usize,
    pub section: SectionKind,
    pub ocr: OcrVerdict,
    /// Misspelled key phrases; the page is still processed.
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct PageAnalysis {
    pub index: usize,
    /// All page text in reading order.
    pub text: String,
    /// Reading-order text outside detected tables.
    pub body: String,
    pub bold: BTreeSet<String>,
    pub flags: PageFlags,
    /// Tables detected on this page alone, before cross-page merging.
    pub tables: Vec<TableGrid>,
    pub figures: Vec<FigureAsset>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub pages: Vec<PageAnalysis>,
    /// Tables after cross-page merging.
    pub tables: Vec<TableGrid>,
}

impl Analysis {
    pub fn figures(&self) -> impl Iterator<Item = &FigureAsset> {
        self.pages.iter().flat_map(|p| p.figures.iter())
    }
}

fn body_text(page: &Page, tables: &[TableGrid], cfg: &PipelineConfig) -> String {
    let regions: Vec<BBox> = tables.iter().map(TableGrid::bbox).collect();
    let chars: Vec<_> = page
        .chars()
        .filter(|c| !regions.iter().any(|r| r.contains_point(c.bbox.center())))
        .collect();
    render_text(&order_chars(&chars, cfg.text.row_tol), &cfg.text)
}

fn analyze_page(page: &Page, cfg: &PipelineConfig) -> PageAnalysis {
    let text = render_text(&reading_order(page, cfg.text.row_tol), &cfg.text);
    let ocr = ocr_quality_gate(&text, &cfg.ocr);
    let section = classify_section(&text, &cfg.sections);
    let tables = detect_tables(page, &cfg.tables);
    let figures = extract_figures(page, &tables, &cfg.figures);
    PageAnalysis {
        index: page.index,
        body: body_text(page, &tables, cfg),
        bold: bold_tokens(page),
        flags: PageFlags {
            page_index: page.index,
            section,
            flagged: ocr.status == OcrStatus::Misspelled,
            ocr,
        },
        text,
        tables,
        figures,
    }
}

/// Everything that does not need a backend.
pub fn analyze_document(doc: &StructuredDocument, cfg: &PipelineConfig, exec: &Executor) -> Analysis {
    let pages = exec.map(&doc.pages, |p| analyze_page(p, cfg));
    let all: Vec<TableGrid> = pages.iter().flat_map(|p| p.tables.iter().cloned()).collect();
    let tables = merge_cross_page(all, doc, &cfg.tables);
    Analysis { pages, tables }
}

/// The text Agent III reads: each page's body followed by the tables that
/// start on it.
pub fn doc_text(analysis: &Analysis) -> DocText {
    let mut d = DocText::default();
    for p in &analysis.pages {
        let tables: Vec<String> = analysis
            .tables
            .iter()
            .filter(|t| t.page_range.0 == p.index)
            .map(TableGrid::to_pipe_text)
            .collect();
        d.push_page(p.index, &p.body, &tables);
    }
    d
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Page,
    Table,
    Figure,
}

/// What one Agent I page or Agent II asset produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnitReport {
    pub kind: UnitKind,
    pub index: usize,
    pub page_index: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub retriable: bool,
}

pub struct DictionaryStage {
    pub dict: CorefDictionary,
    pub units: Vec<UnitReport>,
    pub revisits: ResolutionReport,
}

enum Unit<'a> {
    Page(&'a PageAnalysis),
    Table(usize, &'a TableGrid),
    Figure(usize, &'a FigureAsset),
}

/// Agents I and II, then revisits.
///
/// Units are extracted on `exec` and committed in canonical order: pages
/// in page order, then tables, then figures.
pub fn build_dictionary(
    analysis: &Analysis,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> DictionaryStage {
    let mut units: Vec<Unit> = analysis.pages.iter().map(Unit::Page).collect();
    units.extend(analysis.tables.iter().enumerate().map(|(i, t)| Unit::Table(i, t)));
    units.extend(analysis.figures().enumerate().map(|(i, f)| Unit::Figure(i, f)));
    let a = &cfg.agents;
    let results: Vec<Result<Vec<PairDecision>, AgentError>> = exec.map(&units, |u| match u {
        Unit::Page(p) => extract_agent1_page(p.index, &p.text, p.flags.section, &p.bold, backend, templates, a),
        Unit::Table(_, t) => extract_table(t, backend, templates, a),
        Unit::Figure(_, f) => extract_figure(f, backend, templates, a),
    });
    let shared = SharedDictionary::default();
    let mut reports = Vec::with_capacity(units.len());
    for (u, r) in units.iter().zip(results) {
        let (kind, index, page_index) = match u {
            Unit::Page(p) => (UnitKind::Page, p.index, p.index),
            Unit::Table(i, t) => (UnitKind::Table, *i, t.page_range.0),
            Unit::Figure(i, f) => (UnitKind::Figure, *i, f.page_index),
        };
        let mut report = UnitReport {
            kind,
            index,
            page_index,
            pairs: Vec::new(),
            error: None,
            retriable: false,
        };
        match r {
            Ok(decisions) => report.pairs = commit(decisions, &shared),
            Err(e) => {
                log::warn!("{:?} {index} failed: {e}", report.kind);
                report.retriable = e.is_retriable();
                report.error = Some(e.to_string());
            }
        }
        reports.push(report);
    }
    let mut dict = shared.into_inner();
    let revisits = dict.process_revisits(|c| ask_revisit(backend, templates, c, a));
    DictionaryStage {
        dict,
        units: reports,
        revisits,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DocStatus {
    /// Every stage succeeded.
    Complete,
    /// Outputs were written but some backend units or chunks failed.
    Partial,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlagsReport {
    pub paper_id: String,
    pub pages: Vec<PageFlags>,
    pub units: Vec<UnitReport>,
    pub revisits: ResolutionReport,
    pub agent3_chunks: usize,
    pub agent3_failures: Vec<crate::agents::ChunkFailure>,
}

pub struct DocumentResult {
    pub paper_id: String,
    pub analysis: Analysis,
    pub dictionary: CorefDictionary,
    pub reactions: Vec<ReactionRecord>,
    pub flags: FlagsReport,
}

impl DocumentResult {
    pub fn status(&self) -> DocStatus {
        let unit_failed = self.flags.units.iter().any(|u| u.error.is_some());
        if unit_failed || !self.flags.agent3_failures.is_empty() {
            DocStatus::Partial
        } else {
            DocStatus::Complete
        }
    }
}

/// Runs every stage on an already loaded document.
pub fn process_document(
    doc: &StructuredDocument,
    paper_id: &str,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> DocumentResult {
    let analysis = analyze_document(doc, cfg, exec);
    let stage = build_dictionary(&analysis, backend, templates, cfg, exec);
    let text = doc_text(&analysis);
    let a3 = run_agent3_document(&text, backend, templates, &cfg.agents);
    let reactions = substitute_all(&a3.reactions, &stage.dict, paper_id);
    DocumentResult {
        paper_id: paper_id.to_string(),
        flags: FlagsReport {
            paper_id: paper_id.to_string(),
            pages: analysis.pages.iter().map(|p| p.flags.clone()).collect(),
            units: stage.units,
            revisits: stage.revisits,
            agent3_chunks: a3.chunks,
            agent3_failures: a3.failures,
        },
        analysis,
        dictionary: stage.dict,
        reactions,
    }
}

/// Writes one document's outputs into `dir`.
pub fn write_document_outputs(result: &DocumentResult, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("reactions.json"), to_canonical_json(&result.reactions))?;
    std::fs::write(dir.join("dictionary.json"), to_canonical_json(&result.dictionary.dump()))?;
    std::fs::write(dir.join("flags.json"), to_canonical_json(&result.flags))?;
    let figures: Vec<FigureAsset> = result.analysis.figures().cloned().collect();
    let manifest = write_assets(dir, &figures)?;
    std::fs::write(dir.join("manifest.json"), to_canonical_json(&manifest))?;
    write_table_dump(&dir.join("tables"), &result.analysis.tables)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct DocSummary {
    pub paper_id: String,
    pub input: String,
    pub status: DocStatus,
    pub reactions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub documents: Vec<DocSummary>,
}

impl RunSummary {
    /// 0 when at least one document went through every stage, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.documents.iter().any(|d| d.status == DocStatus::Complete) {
            0
        } else {
            1
        }
    }
}

/// Paper ids unique within one run: a repeated stem gets a numeric suffix.
fn unique_ids(inputs: &[PathBuf]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    inputs
        .iter()
        .map(|p| {
            let base = paper_id_of(p);
            let mut id = base.clone();
            let mut n = 2;
            while !seen.insert(id.clone()) {
                id = format!("{base}-{n}");
                n += 1;
            }
            id
        })
        .collect()
}

fn run_one(
    input: &Path,
    paper_id: &str,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &PipelineConfig,
    exec: &Executor,
) -> DocSummary {
    let started = Instant::now();
    let decoder = decoder_for(cfg);
    let outcome = load_document(input, decoder.as_ref()).and_then(|doc| {
        let result = process_document(&doc, paper_id, backend, templates, cfg, exec);
        write_document_outputs(&result, &cfg.output_dir.join(paper_id))?;
        Ok(result)
    });
    let (status, reactions, error) = match outcome {
        Ok(r) => (r.status(), r.reactions.len(), None),
        Err(e) => {
            log::error!("{}: {e}", input.display());
            (DocStatus::Failed, 0, Some(e.to_string()))
        }
    };
    DocSummary {
        paper_id: paper_id.to_string(),
        input: input.display().to_string(),
        status,
        reactions,
        error,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Runs the pipeline over `inputs` and writes everything under
/// `cfg.output_dir`: one directory per paper, plus the config snapshot,
/// `run.log`, `summary.json` and `timing.csv` at the top level.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
) -> io::Result<RunSummary> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("config.toml"), cfg.snapshot())?;
    let exec = Executor::new(cfg.workers);
    let ids = unique_ids(inputs);
    let jobs: Vec<(&PathBuf, &String)> = inputs.iter().zip(&ids).collect();
    let documents = exec.map(&jobs, |(input, id)| run_one(input, id, backend, templates, cfg, &exec));
    let summary = RunSummary { documents };

    let mut log = String::new();
    for d in &summary.documents {
        let _ = write!(log, "{} {:?} reactions={}", d.paper_id, d.status, d.reactions);
        if let Some(e) = &d.error {
            let _ = write!(log, " error={e}");
        }
        log.push('\n');
    }
    if summary.documents.is_empty() {
        log.push_str("no input documents\n");
    }
    std::fs::write(cfg.output_dir.join("run.log"), log)?;
    std::fs::write(cfg.output_dir.join("summary.json"), to_canonical_json(&summary))?;
    let timing: Vec<TimingRow> = summary
        .documents
        .iter()
        .filter(|d| d.status != DocStatus::Failed)
        .map(|d| TimingRow {
            paper_id: d.paper_id.clone(),
            seconds: d.seconds,
            usd: None,
        })
        .collect();
    write_timing(&cfg.output_dir.join("timing.csv"), &timing)?;
    Ok(summary)
}
