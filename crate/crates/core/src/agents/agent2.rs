use super::{
    ask, commit, decide_pairs, provenance, AgentConfig, AgentError, Attachment, ExpectedShape, ExtractionBackend,
    PairDecision, PairOutcome, Parsed, TemplateSet,
};
use crate::coref::{AgentId, Modality, SharedDictionary};
use crate::figures::{FigureAsset, FigurePayload};
use crate::tables::TableGrid;

fn mime_of(format_tag: &str) -> &'static str {
    match format_tag {
        "jpeg" => "image/jpeg",
        "jp2" => "image/jp2",
        "png" => "image/png",
        _ => "application/octet-stream",
    }
}

fn coref_pairs(
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    content: &str,
    attachments: &[Attachment],
    cfg: &AgentConfig,
) -> Result<Vec<(String, String)>, AgentError> {
    match ask(backend, &templates.coref_asset, content, ExpectedShape::CorefMap, attachments, cfg)? {
        Parsed::CorefMap(m) => Ok(m.into_iter().collect()),
        _ => unreachable!("coref map shape"),
    }
}

/// Sends a table, serialized row by row as pipe-delimited text.
pub fn extract_table(
    table: &TableGrid,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &AgentConfig,
) -> Result<Vec<PairDecision>, AgentError> {
    let content = table.to_pipe_text();
    if content.trim().is_empty() {
        return Ok(Vec::new());
    }
    let pairs = coref_pairs(backend, templates, &content, &[], cfg)?;
    let prov = provenance(table.page_range.0, AgentId::Agent2, Modality::Table);
    Ok(decide_pairs(pairs, &content, |_| false, prov, cfg))
}

/// Sends a figure's enclosed text, plus its raw payload when the backend
/// takes images. A figure with neither is skipped without a call.
pub fn extract_figure(
    figure: &FigureAsset,
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &AgentConfig,
) -> Result<Vec<PairDecision>, AgentError> {
    let mut attachments = Vec::new();
    if backend.is_multimodal() {
        if let FigurePayload::Embedded { format_tag, bytes, .. } = &figure.payload {
            if let Some(b) = bytes.bytes() {
                attachments.push(Attachment {
                    mime: mime_of(format_tag).to_string(),
                    bytes: b.into(),
                });
            }
        }
    }
    if figure.enclosed_text.trim().is_empty() && attachments.is_empty() {
        return Ok(Vec::new());
    }
    let pairs = coref_pairs(backend, templates, &figure.enclosed_text, &attachments, cfg)?;
    let prov = provenance(figure.page_index, AgentId::Agent2, Modality::Figure);
    Ok(decide_pairs(pairs, &figure.enclosed_text, |_| false, prov, cfg))
}

/// Extraction for every asset, tables first, each with its own result.
pub fn extract_agent2_assets(
    tables: &[TableGrid],
    figures: &[FigureAsset],
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    cfg: &AgentConfig,
) -> Vec<Result<Vec<PairDecision>, AgentError>> {
    tables
        .iter()
        .map(|t| extract_table(t, backend, templates, cfg))
        .chain(figures.iter().map(|f| extract_figure(f, backend, templates, cfg)))
        .collect()
}

/// Extraction and commit; a failed asset contributes nothing.
pub fn run_agent2_assets(
    tables: &[TableGrid],
    figures: &[FigureAsset],
    backend: &dyn ExtractionBackend,
    templates: &TemplateSet,
    dict: &SharedDictionary,
    cfg: &AgentConfig,
) -> Vec<PairOutcome> {
    extract_agent2_assets(tables, figures, backend, templates, cfg)
        .into_iter()
        .filter_map(|r| r.map_err(|e| log::warn!("asset skipped: {e}")).ok())
        .flat_map(|d| commit(d, dict))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::super::{BackendError, Counting, PairResult, RuleBackend};
    use super::*;
    use crate::doc::PayloadRef;
    use crate::figures::FigureKind;
    use crate::tables::GridOrigin;
    use crate::BBox;

    fn table(rows: &[&[&str]]) -> TableGrid {
        TableGrid {
            page_range: (1, 1),
            col_boundaries: (0..=rows[0].len()).map(|i| i as f64 * 10.0).collect(),
            row_boundaries: (0..=rows.len()).map(|i| i as f64 * 10.0).collect(),
            cells: rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect(),
            origin: GridOrigin::Vector,
        }
    }

    fn run(tables: &[TableGrid], figures: &[FigureAsset], b: &dyn ExtractionBackend) -> (Vec<PairOutcome>, SharedDictionary) {
        let dict = SharedDictionary::default();
        let out = run_agent2_assets(tables, figures, b, &TemplateSet::default(), &dict, &AgentConfig::default());
        (out, dict)
    }

    #[test]
    fn directly_named_ligand_is_not_a_label() {
        let (out, dict) = run(&[table(&[&["Entry", "Ligand", "Yield"], &["3", "Amphos", "93%"]])], &[], &RuleBackend::default());
        assert!(out.is_empty());
        assert!(dict.snapshot().is_empty());
    }

    #[test]
    fn definition_cell_is_inserted_with_table_provenance() {
        let (out, dict) = run(&[table(&[&["2d = methyl 4-iodobenzoate", "x"]])], &[], &RuleBackend::default());
        assert_eq!(out[0].result, PairResult::Inserted);
        let e = dict.snapshot().entry("2d").cloned().unwrap();
        assert_eq!(e.molecule.raw(), "methyl 4-iodobenzoate");
        assert_eq!(e.provenance.modality, Modality::Table);
        assert_eq!(e.provenance.page_index, 1);
    }

    #[test]
    fn empty_assets_make_no_calls() {
        let b = Counting::new(RuleBackend::default());
        let (out, _) = run(&[], &[], &b);
        assert!(out.is_empty());
        assert_eq!(b.calls(), 0);
    }

    struct Vision {
        seen: Mutex<Vec<String>>,
    }

    impl ExtractionBackend for Vision {
        fn submit(&self, _: &str, _: &str, _: usize) -> Result<String, BackendError> {
            Ok("{}".into())
        }

        fn context_limit(&self) -> usize {
            1000
        }

        fn is_multimodal(&self) -> bool {
            true
        }

        fn submit_with_attachments(&self, _: &str, _: &str, _: usize, a: &[Attachment]) -> Result<String, BackendError> {
            self.seen.lock().unwrap().extend(a.iter().map(|x| x.mime.clone()));
            Ok(r#"{"4c": "2-bromo-pyridine"}"#.into())
        }
    }

    #[test]
    fn multimodal_backend_gets_payload() {
        let fig = FigureAsset {
            page_index: 2,
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0),
            kind: FigureKind::Embedded,
            payload: FigurePayload::Embedded {
                format_tag: "jpeg".into(),
                bytes: PayloadRef::inline(vec![0xFF, 0xD8]),
                resolution: 72.0,
            },
            enclosed_text: String::new(),
        };
        let b = Vision { seen: Mutex::new(Vec::new()) };
        let (out, _) = run(&[], std::slice::from_ref(&fig), &b);
        assert_eq!(*b.seen.lock().unwrap(), ["image/jpeg"]);
        // The label never appears in the text, so nothing backs it up.
        assert!(matches!(out[0].result, PairResult::Rejected { .. }));
        // A text-only backend has nothing to read.
        let c = Counting::new(RuleBackend::default());
        run(&[], &[fig], &c);
        assert_eq!(c.calls(), 0);
    }
}
