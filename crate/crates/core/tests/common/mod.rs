#![allow(dead_code)]

use std::path::PathBuf;

use stexquiz_core::graph::{build_graph, load_manifest, KnowledgeGraph};
use stexquiz_core::stex::SourceDocument;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus_docs() -> Vec<SourceDocument> {
    load_manifest(&fixtures().join("corpora/ai-course-mini/manifest.txt"))
        .expect("fixture corpus loads")
}

pub fn corpus() -> KnowledgeGraph {
    build_graph(&corpus_docs()).expect("fixture corpus builds")
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}
