use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chemminer_core::agents::{RuleBackend, TemplateSet};
use chemminer_core::eval::{build_report, load_papers, EvalOptions, Field, FieldCounts};
use chemminer_core::fixture::{paper_pdf, PAPER_ID};
use chemminer_core::ingest::{convert_pdf, BuiltinDecoder};
use chemminer_core::par::Executor;
use chemminer_core::pipeline::{process_document, run_pipeline, DocStatus};
use chemminer_core::{PipelineConfig, StructuredDocument};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden() -> String {
    std::fs::read_to_string(fixtures().join(format!("{PAPER_ID}.reactions.json"))).unwrap()
}

#[test]
fn checked_in_pdf_matches_generator() {
    let on_disk = std::fs::read(fixtures().join(format!("{PAPER_ID}.pdf"))).unwrap();
    assert!(on_disk == paper_pdf(), "regenerate with `cargo run -p chemminer-core --example make_fixture`");
}

#[test]
fn checked_in_interchange_matches_decoder() {
    let doc = convert_pdf(&paper_pdf(), PAPER_ID, &BuiltinDecoder).unwrap();
    let on_disk = std::fs::read_to_string(fixtures().join(format!("{PAPER_ID}.json"))).unwrap();
    assert_eq!(doc.to_interchange_json(), on_disk);
    let back = StructuredDocument::from_interchange_json(&on_disk).unwrap();
    assert_eq!(back.to_interchange_json(), on_disk);
}

#[test]
fn interchange_and_pdf_inputs_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        output_dir: tmp.path().join("out"),
        ..Default::default()
    };
    let inputs = [fixtures().join(format!("{PAPER_ID}.json"))];
    let summary = run_pipeline(&cfg, &inputs, &RuleBackend::default(), &TemplateSet::default()).unwrap();
    assert_eq!(summary.exit_code(), 0);
    let got = std::fs::read_to_string(cfg.output_dir.join(PAPER_ID).join("reactions.json")).unwrap();
    assert_eq!(got, golden());
}

#[test]
fn in_memory_run_reports_flags_and_tables() {
    let doc = convert_pdf(&paper_pdf(), PAPER_ID, &BuiltinDecoder).unwrap();
    let cfg = PipelineConfig::default();
    let result = process_document(
        &doc,
        PAPER_ID,
        &RuleBackend::default(),
        &TemplateSet::default(),
        &cfg,
        &Executor::sequential(),
    );
    assert_eq!(result.status(), DocStatus::Complete);
    assert_eq!(result.reactions.len(), 3);
    let flagged: Vec<usize> = result.flags.pages.iter().filter(|p| p.flagged).map(|p| p.page_index).collect();
    assert_eq!(flagged, [2]);
    let shapes: Vec<(usize, usize)> = result.analysis.tables.iter().map(|t| (t.rows(), t.cols())).collect();
    assert_eq!(shapes, [(3, 6), (4, 3)]);
    // The scheme's contradicting label was settled by the revisit.
    assert_eq!(result.dictionary.resolve("1b").map(|m| m.raw()), Some("4-methylbenzaldehyde"));
    assert_eq!(result.dictionary.conflict_count("1b"), 1);
}

#[test]
fn pipeline_output_scores_against_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        output_dir: tmp.path().join("out"),
        ..Default::default()
    };
    let pdf = tmp.path().join(format!("{PAPER_ID}.pdf"));
    std::fs::write(&pdf, paper_pdf()).unwrap();
    run_pipeline(&cfg, &[pdf], &RuleBackend::default(), &TemplateSet::default()).unwrap();

    let papers = load_papers(&cfg.output_dir, &fixtures().join("truth")).unwrap();
    let report = build_report(&papers, EvalOptions::default(), None, &Executor::new(2));
    let counts: BTreeMap<Field, FieldCounts> = report.fields.iter().map(|f| (f.field, f.counts)).collect();
    assert_eq!(counts[&Field::Yield], FieldCounts::new(3, 3, 4));
    assert_eq!(counts[&Field::Reactant], FieldCounts::new(3, 3, 4));
    assert_eq!(counts[&Field::Solvent], FieldCounts::new(2, 3, 4));
    assert_eq!(counts[&Field::Product], FieldCounts::new(3, 3, 4));
    // Catalyst is annotated as absent everywhere, so it is not scored.
    assert!(!counts.contains_key(&Field::Catalyst));

    let solvent = report.fields.iter().find(|f| f.field == Field::Solvent).unwrap();
    // c=2, e=3, t=4: F1 = 2ce / (ct + e^2) = 12/17.
    assert_eq!(solvent.exact.f1, "12/17");
    assert_eq!(solvent.percent.f1.to_string(), "70.59");
    assert_eq!(solvent.percent.efficiency.to_string(), "50.00");
}

