use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stexquiz_core::exec::Execution;
use stexquiz_core::graph::{build_graph, build_graph_with, load_manifest};
use stexquiz_core::question::from_document;
use stexquiz_core::stex::SourceDocument;
use stexquiz_core::validate::validate_batch;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The mini corpus copied `n` times under distinct archive prefixes.
fn corpus(n: usize) -> Vec<SourceDocument> {
    let base = load_manifest(&fixtures().join("corpora/ai-course-mini/manifest.txt")).unwrap();
    (0..n)
        .flat_map(|i| {
            base.iter().map(move |d| {
                SourceDocument::course(format!("copy{i}/{}", d.doc_id), d.text.clone())
            })
        })
        .collect()
}

fn questions() -> Vec<stexquiz_core::question::QuizQuestion> {
    let mut out = Vec::new();
    for dir in ["exemplars", "questions"] {
        let mut paths: Vec<_> = std::fs::read_dir(fixtures().join(dir))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        paths.sort();
        for p in paths {
            let doc = SourceDocument::generated(
                p.file_stem().unwrap().to_string_lossy(),
                std::fs::read_to_string(&p).unwrap(),
            );
            out.extend(from_document(&doc).unwrap().questions);
        }
    }
    // repeat to give the pool something to chew on
    out.iter().cycle().take(out.len() * 20).cloned().collect()
}

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn bench_build(c: &mut Criterion) {
    let docs = corpus(16);
    let mut group = c.benchmark_group("build_graph");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_graph_with(&docs, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_search(c: &mut Criterion) {
    let graph = build_graph(&corpus(4)).unwrap();
    let queries: Vec<String> = [
        "arc consistency",
        "alpha beta pruning",
        "STRIPS action",
        "valuation",
        "first-order term",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut group = c.benchmark_group("search_definitions");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| graph.search_definitions_with(&queries, 10, exec))
        });
    }
    group.finish();
}

fn bench_validate(c: &mut Criterion) {
    let graph = build_graph(&corpus(1)).unwrap();
    let qs = questions();
    let mut group = c.benchmark_group("validate_batch");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| validate_batch(&qs, &graph, None, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_build, bench_search, bench_validate);
criterion_main!(benches);
