use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::stex::SourceDocument;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot read corpus file {path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Reads a corpus manifest: one relative `.tex` path per line, resolved
/// against the manifest's directory. Blank lines and `#` comments are
/// skipped. The document id is the relative path without `.tex`.
pub fn load_manifest(path: &Path) -> Result<Vec<SourceDocument>, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Manifest {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut docs = Vec::new();
    for line in text.lines() {
        let rel = line.trim();
        if rel.is_empty() || rel.starts_with('#') {
            continue;
        }
        let file = base.join(rel);
        let body = std::fs::read_to_string(&file)
            .map_err(|source| ManifestError::Document { path: file, source })?;
        let doc_id = rel.strip_suffix(".tex").unwrap_or(rel).replace('\\', "/");
        docs.push(SourceDocument::course(doc_id, body));
    }
    Ok(docs)
}
