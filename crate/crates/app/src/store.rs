//! File-backed record store: `<root>/<kind>/<id>/<revision>.json`, one
//! file per revision, written through a temp file and a rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Corpus,
    Draft,
    Review,
    SurveyResponse,
    Transcript,
    Reject,
}

impl EntityKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            EntityKind::Corpus => "corpus",
            EntityKind::Draft => "draft",
            EntityKind::Review => "review",
            EntityKind::SurveyResponse => "survey_response",
            EntityKind::Transcript => "transcript",
            EntityKind::Reject => "reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord<T> {
    pub kind: EntityKind,
    pub id: String,
    pub revision: u64,
    pub created_at: String,
    pub payload: T,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Where timestamps come from. A fixed clock makes whole record files
/// reproducible.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    fn now(self) -> String {
        let t = match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => t,
        };
        t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    clock: Clock,
    // one writer at a time keeps revision numbering gap-free
    write_lock: Mutex<()>,
}

/// Ids carry `/`, `#` and `?`; everything outside `[A-Za-z0-9._-]` is
/// percent-encoded so an id is a single path component.
pub fn encode_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    if out.starts_with('.') {
        out.replace_range(..1, "%2E");
    }
    out
}

pub fn decode_id(encoded: &str) -> Option<String> {
    let bytes = encoded.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = encoded.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

impl Store {
    pub fn open(root: impl Into<PathBuf>, clock: Clock) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Store {
            root,
            clock,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_dir(&self, kind: EntityKind, id: &str) -> PathBuf {
        self.root.join(kind.dir_name()).join(encode_id(id))
    }

    fn revisions(dir: &Path) -> Result<Vec<u64>, StoreError> {
        let entries = match fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(StoreError::Io {
                    path: dir.to_owned(),
                    source,
                })
            }
        };
        let mut revs: Vec<u64> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".json")?.parse().ok())
            .collect();
        revs.sort_unstable();
        Ok(revs)
    }

    /// Writes the next revision of `id` and returns it.
    pub fn put<T: Serialize + Clone>(
        &self,
        kind: EntityKind,
        id: &str,
        payload: &T,
    ) -> Result<StoreRecord<T>, StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = self.record_dir(kind, id);
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| StoreError::Io { path, source }
        };
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let revision = Self::revisions(&dir)?.last().map_or(1, |r| r + 1);
        let record = StoreRecord {
            kind,
            id: id.to_owned(),
            revision,
            created_at: self.clock.now(),
            payload: payload.clone(),
        };
        let mut body = serde_json::to_vec_pretty(&record).map_err(|source| StoreError::Decode {
            path: dir.clone(),
            source,
        })?;
        body.push(b'\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io(&dir))?;
        tmp.write_all(&body).map_err(io(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io(&dir))?;
        let path = dir.join(format!("{revision:06}.json"));
        tmp.persist(&path).map_err(|e| StoreError::Io {
            path: path.clone(),
            source: e.error,
        })?;
        Ok(record)
    }

    fn read<T: DeserializeOwned>(path: &Path) -> Result<StoreRecord<T>, StoreError> {
        let text = fs::read(path).map_err(|source| StoreError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_slice(&text).map_err(|source| StoreError::Decode {
            path: path.to_owned(),
            source,
        })
    }

    pub fn latest<T: DeserializeOwned>(
        &self,
        kind: EntityKind,
        id: &str,
    ) -> Result<Option<StoreRecord<T>>, StoreError> {
        let dir = self.record_dir(kind, id);
        match Self::revisions(&dir)?.last() {
            Some(rev) => Self::read(&dir.join(format!("{rev:06}.json"))).map(Some),
            None => Ok(None),
        }
    }

    /// All revisions of `id`, oldest first.
    pub fn history<T: DeserializeOwned>(
        &self,
        kind: EntityKind,
        id: &str,
    ) -> Result<Vec<StoreRecord<T>>, StoreError> {
        let dir = self.record_dir(kind, id);
        Self::revisions(&dir)?
            .into_iter()
            .map(|rev| Self::read(&dir.join(format!("{rev:06}.json"))))
            .collect()
    }

    /// Raw bytes of one revision, for byte-level comparisons.
    pub fn raw(&self, kind: EntityKind, id: &str, revision: u64) -> Result<Vec<u8>, StoreError> {
        let path = self
            .record_dir(kind, id)
            .join(format!("{revision:06}.json"));
        fs::read(&path).map_err(|source| StoreError::Io { path, source })
    }

    /// Ids of every record of `kind`, sorted.
    pub fn ids(&self, kind: EntityKind) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(kind.dir_name());
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => return Err(StoreError::Io { path: dir, source }),
        };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| decode_id(e.file_name().to_str()?))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Latest revision of every record of `kind`, in id order.
    pub fn list<T: DeserializeOwned>(
        &self,
        kind: EntityKind,
    ) -> Result<Vec<StoreRecord<T>>, StoreError> {
        let mut out = Vec::new();
        for id in self.ids(kind)? {
            if let Some(r) = self.latest(kind, &id)? {
                out.push(r);
            }
        }
        Ok(out)
    }
}
