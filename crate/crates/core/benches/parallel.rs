//! Sequential versus pooled execution over several copies of the fixture
//! paper. Build with `--no-default-features` to see the fallback alone.

use std::hint::black_box;

use chemminer_core::agents::{RuleBackend, TemplateSet};
use chemminer_core::fixture::{paper_pdf, PAPER_ID};
use chemminer_core::ingest::{convert_pdf, BuiltinDecoder};
use chemminer_core::par::Executor;
use chemminer_core::pipeline::process_document;
use chemminer_core::{PipelineConfig, StructuredDocument};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn corpus(n: usize) -> Vec<StructuredDocument> {
    let doc = convert_pdf(&paper_pdf(), PAPER_ID, &BuiltinDecoder).expect("fixture decodes");
    vec![doc; n]
}

fn run(docs: &[StructuredDocument], exec: &Executor) -> usize {
    let cfg = PipelineConfig::default();
    let backend = RuleBackend::default();
    let templates = TemplateSet::default();
    exec.map(docs, |d| process_document(d, PAPER_ID, &backend, &templates, &cfg, exec).reactions.len())
        .into_iter()
        .sum()
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    for n in [4, 16] {
        let docs = corpus(n);
        let executors = [("sequential", Executor::sequential()), ("pooled", Executor::new(8))];
        for (name, exec) in &executors {
            group.bench_with_input(BenchmarkId::new(*name, n), &docs, |b, docs| b.iter(|| black_box(run(docs, exec))));
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
