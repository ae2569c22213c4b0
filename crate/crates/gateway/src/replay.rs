use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::{ChatExchange, Completion, CompletionOutcome, GatewayError, LlmBackend};

pub const REPLAY_FORMAT: &str = "stexquiz-replay/1";

/// One stored exchange, `<hash>.json` in the store directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub format: String,
    pub hash: String,
    pub exchange: ChatExchange,
    pub outcome: CompletionOutcome,
}

/// A directory of replay records. Reads need no locking; writes go
/// through a temp file and a rename.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Result<Option<ReplayRecord>, GatewayError> {
        let path = self.path_for(hash);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Store(format!("{}: {e}", path.display()))),
        };
        let record: ReplayRecord = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Store(format!("{}: {e}", path.display())))?;
        if record.format != REPLAY_FORMAT {
            return Err(GatewayError::Store(format!(
                "{}: unsupported format {}",
                path.display(),
                record.format
            )));
        }
        if record.hash != hash {
            return Err(GatewayError::Store(format!(
                "{}: hash field is {}",
                path.display(),
                record.hash
            )));
        }
        Ok(Some(record))
    }

    pub fn put(
        &self,
        exchange: &ChatExchange,
        outcome: &CompletionOutcome,
    ) -> Result<ReplayRecord, GatewayError> {
        let record = ReplayRecord {
            format: REPLAY_FORMAT.to_owned(),
            hash: exchange.content_hash(),
            exchange: exchange.clone(),
            outcome: outcome.clone(),
        };
        let store_err =
            |e: std::io::Error| GatewayError::Store(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(store_err)?;
        let mut body = serde_json::to_string_pretty(&record).expect("records serialize");
        body.push('\n');
        let tmp = self.dir.join(format!(".{}.tmp", record.hash));
        let mut f = fs::File::create(&tmp).map_err(store_err)?;
        f.write_all(body.as_bytes()).map_err(store_err)?;
        f.sync_all().map_err(store_err)?;
        fs::rename(&tmp, self.path_for(&record.hash)).map_err(store_err)?;
        Ok(record)
    }

    /// Hashes of all stored records, sorted.
    pub fn hashes(&self) -> Result<Vec<String>, GatewayError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(GatewayError::Store(format!("{}: {e}", self.dir.display()))),
        };
        let mut out: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                name.strip_suffix(".json")
                    .filter(|h| !h.starts_with('.'))
                    .map(str::to_owned)
            })
            .collect();
        out.sort();
        Ok(out)
    }
}

/// Answers from a replay store only.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    store: ReplayStore,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore) -> Self {
        ReplayBackend { store }
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError> {
        exchange.check()?;
        let hash = exchange.content_hash();
        match self.store.get(&hash)? {
            Some(record) => Ok(record.outcome),
            None => Err(GatewayError::ReplayMiss(hash)),
        }
    }

    fn describe(&self) -> String {
        format!("replay:{}", self.store.dir.display())
    }
}

/// Passes exchanges to `inner` and stores every successful outcome.
pub struct RecordingBackend<B> {
    inner: B,
    store: ReplayStore,
    write_lock: Mutex<()>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B, store: ReplayStore) -> Self {
        RecordingBackend {
            inner,
            store,
            write_lock: Mutex::new(()),
        }
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError> {
        let outcome = self.inner.complete(exchange)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.store.put(exchange, &outcome)?;
        Ok(outcome)
    }

    fn describe(&self) -> String {
        format!(
            "record:{}:{}",
            self.store.dir.display(),
            self.inner.describe()
        )
    }
}

/// Returns queued completions in order, whatever the exchange. Used to
/// author replay fixtures and in tests.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Completion>>,
}

impl ScriptedBackend {
    pub fn new(script: impl IntoIterator<Item = Completion>) -> Self {
        ScriptedBackend {
            queue: Mutex::new(script.into_iter().collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError> {
        exchange.check()?;
        let next = self
            .queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front();
        match next {
            Some(c) => Ok(CompletionOutcome::estimated(exchange, c)),
            None => Err(GatewayError::ReplayMiss(exchange.content_hash())),
        }
    }

    fn describe(&self) -> String {
        "scripted".to_owned()
    }
}
