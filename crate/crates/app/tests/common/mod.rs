#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use stexquiz_app::store::{Clock, Store};
use stexquiz_app::App;
use stexquiz_core::prompt::{GenerationRequest, MasterPromptTemplate};
use stexquiz_gateway::{
    Completion, LlmBackend, RecordingBackend, ReplayBackend, ReplayStore, ScriptedBackend,
    SessionOptions, ToolCall,
};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn manifest() -> PathBuf {
    fixtures().join("corpora/ai-course-mini/manifest.txt")
}

pub fn request() -> GenerationRequest {
    serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("requests/arc-consistency.json")).unwrap(),
    )
    .unwrap()
}

pub fn fixed_clock() -> Clock {
    Clock::Fixed(Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap())
}

/// An app over a fresh store with the fixture corpus ingested.
pub fn app_with(store_dir: &Path, backend: Arc<dyn LlmBackend>) -> App {
    let store = Store::open(store_dir, fixed_clock()).unwrap();
    let app = App::open(
        store,
        backend,
        MasterPromptTemplate::default(),
        SessionOptions::default(),
    )
    .unwrap();
    app.ingest_corpus(&manifest()).unwrap();
    app
}

pub fn replay_dir(name: &str) -> PathBuf {
    fixtures().join("replay").join(name)
}

pub fn replay_app(store_dir: &Path, session: &str) -> App {
    app_with(
        store_dir,
        Arc::new(ReplayBackend::new(ReplayStore::new(replay_dir(session)))),
    )
}

/// The scripted answer of a session fixture: one search call, then the
/// text in fixtures/sessions/<name>.md.
pub fn session_script(output: &str) -> Vec<Completion> {
    vec![
        Completion::Call(ToolCall {
            name: "search".into(),
            arguments: vec!["arc consistency".into(), "constraint network".into()],
        }),
        Completion::Text(output.to_owned()),
    ]
}

pub fn scripted_app(store_dir: &Path, output: &str) -> App {
    app_with(
        store_dir,
        Arc::new(ScriptedBackend::new([Completion::Text(output.to_owned())])),
    )
}

/// Rewrites a replay fixture from its session text.
pub fn record_session(replay: &str, session: &str) {
    let dir = replay_dir(replay);
    let _ = std::fs::remove_dir_all(&dir);
    let output =
        std::fs::read_to_string(fixtures().join("sessions").join(format!("{session}.md"))).unwrap();
    let recorder = RecordingBackend::new(
        ScriptedBackend::new(session_script(&output)),
        ReplayStore::new(&dir),
    );
    let tmp = tempfile::tempdir().unwrap();
    let app = app_with(tmp.path(), Arc::new(recorder));
    let _ = app.generate(&request(), None);
}

/// Every file under `dir`, relative path and bytes, sorted.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_owned(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}
