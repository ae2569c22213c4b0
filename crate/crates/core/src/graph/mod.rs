//! Module/symbol graph over a parsed corpus, with fragment indexing for
//! retrieval.

mod build;
mod manifest;
mod search;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stex::{ParseError, Span};

pub(crate) use build::import_ref;
pub use build::{build_graph, build_graph_with};
pub use manifest::{load_manifest, ManifestError};
pub use search::{tokenize, SearchHit, DEFAULT_SEARCH_K};

/// `<doc_id>?<module path>`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleId(pub String);

/// `<doc_id>?<module path>?<symbol name>`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolId(pub String);

impl ModuleId {
    pub fn new(doc_id: &str, path: &str) -> Self {
        ModuleId(format!("{doc_id}?{path}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn doc_id(&self) -> &str {
        self.0.split_once('?').map_or(&self.0, |(d, _)| d)
    }

    pub fn path(&self) -> &str {
        self.0.split_once('?').map_or("", |(_, p)| p)
    }
}

impl SymbolId {
    pub fn new(module: &ModuleId, name: &str) -> Self {
        SymbolId(format!("{}?{name}", module.0))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn name(&self) -> &str {
        self.0.rsplit_once('?').map_or(&self.0, |(_, n)| n)
    }

    pub fn module(&self) -> ModuleId {
        ModuleId(self.0.rsplit_once('?').map_or("", |(m, _)| m).to_owned())
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An import as written: `\usemodule[archive]{path}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRef {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub archive: Option<String>,
    pub path: String,
}

impl fmt::Display for ImportRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.archive {
            Some(a) => write!(f, "[{a}]{{{}}}", self.path),
            None => write!(f, "{{{}}}", self.path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum DanglingReason {
    Missing,
    Ambiguous { candidates: Vec<ModuleId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingImport {
    pub import: ImportRef,
    #[serde(flatten)]
    pub reason: DanglingReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleEntry {
    pub id: ModuleId,
    pub name: String,
    pub doc_id: String,
    pub imports: Vec<ModuleId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dangling_imports: Vec<DanglingImport>,
    pub symbols: Vec<SymbolId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub id: SymbolId,
    pub name: String,
    pub module: ModuleId,
    /// `symdecl` or `symdef`.
    pub declared_by: String,
    pub defining_fragments: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FragmentKind {
    Definition,
    Example,
    Remark,
    Plain,
}

impl FragmentKind {
    pub fn from_environment(name: &str) -> Self {
        match name {
            "definition" | "sdefinition" => FragmentKind::Definition,
            "example" | "sexample" => FragmentKind::Example,
            "remark" => FragmentKind::Remark,
            _ => FragmentKind::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: String,
    pub doc_id: String,
    pub kind: FragmentKind,
    pub section_path: Vec<String>,
    pub text: String,
    pub span: Span,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<ModuleId>,
    pub mentioned_symbols: BTreeSet<SymbolId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Chapter,
    Section,
    Subsection,
}

impl Granularity {
    pub fn level(self) -> u8 {
        match self {
            Granularity::Chapter => 0,
            Granularity::Section => 1,
            Granularity::Subsection => 2,
        }
    }

    pub fn from_macro(name: &str) -> Option<Self> {
        match name {
            "chapter" => Some(Granularity::Chapter),
            "section" => Some(Granularity::Section),
            "subsection" => Some(Granularity::Subsection),
            _ => None,
        }
    }
}

/// A sectioning command and the fragments up to the next command of the
/// same or higher level. Fragment indexes are contiguous in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionNode {
    pub title: String,
    pub level: Granularity,
    pub doc_id: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub fragment_start: usize,
    pub fragment_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentInfo {
    pub doc_id: String,
    pub modules: Vec<ModuleId>,
    /// Imports outside any module.
    pub imports: Vec<ModuleId>,
    pub fragment_start: usize,
    pub fragment_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphWarning {
    DanglingImport {
        doc_id: String,
        module: Option<ModuleId>,
        import: ImportRef,
        reason: DanglingReason,
    },
    UnresolvedReference {
        fragment: String,
        name: String,
    },
    DeclarationOutsideModule {
        doc_id: String,
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("module {module} declares `{name}` twice")]
    DuplicateSymbol { name: String, module: ModuleId },
    #[error("module {0} is declared twice")]
    DuplicateModule(ModuleId),
    #[error("document `{0}` appears twice in the corpus")]
    DuplicateDocument(String),
    #[error("failed to parse {doc_id}: {source}")]
    ParseFailure {
        doc_id: String,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown symbol `{0}`")]
    Unknown(String),
    #[error("`{name}` is ambiguous: {}", candidates.iter().map(SymbolId::as_str).collect::<Vec<_>>().join(", "))]
    Ambiguous {
        name: String,
        candidates: Vec<SymbolId>,
    },
    #[error("unknown module {0}")]
    UnknownScope(ModuleId),
    #[error("unknown symbol id {0}")]
    UnknownSymbol(SymbolId),
}

#[derive(Debug, Clone, Serialize)]
pub struct KnowledgeGraph {
    pub documents: Vec<DocumentInfo>,
    pub modules: BTreeMap<ModuleId, ModuleEntry>,
    pub symbols: BTreeMap<SymbolId, SymbolEntry>,
    pub fragments: Vec<Fragment>,
    pub sections: Vec<SectionNode>,
    pub section_roots: Vec<usize>,
    pub warnings: Vec<GraphWarning>,
    #[serde(skip)]
    index: Index,
}

#[derive(Debug, Clone, Default)]
struct Index {
    fragment_by_id: HashMap<String, usize>,
    symbols_by_name: HashMap<String, Vec<SymbolId>>,
    modules_by_name: HashMap<String, Vec<ModuleId>>,
    fragment_section: Vec<Option<usize>>,
    term_counts: Vec<HashMap<String, u32>>,
    boost_terms: HashMap<ModuleId, BTreeSet<String>>,
}

impl KnowledgeGraph {
    pub fn fragment(&self, id: &str) -> Option<&Fragment> {
        self.index
            .fragment_by_id
            .get(id)
            .map(|&i| &self.fragments[i])
    }

    pub fn fragment_index(&self, id: &str) -> Option<usize> {
        self.index.fragment_by_id.get(id).copied()
    }

    pub fn symbol(&self, id: &SymbolId) -> Option<&SymbolEntry> {
        self.symbols.get(id)
    }

    pub fn document(&self, doc_id: &str) -> Option<&DocumentInfo> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Every symbol with this name anywhere in the corpus.
    pub fn symbols_named(&self, name: &str) -> &[SymbolId] {
        self.index
            .symbols_by_name
            .get(name)
            .map_or(&[], Vec::as_slice)
    }

    pub fn modules_named(&self, name: &str) -> &[ModuleId] {
        self.index
            .modules_by_name
            .get(name)
            .map_or(&[], Vec::as_slice)
    }

    /// Resolves an import as written in document `from_doc`.
    pub fn resolve_import(
        &self,
        import: &ImportRef,
        from_doc: &str,
    ) -> Result<ModuleId, DanglingReason> {
        build::resolve_import(&self.index.modules_by_name, import, from_doc)
    }

    /// Modules reachable from `seeds` through imports, seeds included.
    pub fn visible_modules<'a>(
        &self,
        seeds: impl IntoIterator<Item = &'a ModuleId>,
    ) -> BTreeSet<ModuleId> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&ModuleId> = seeds.into_iter().collect();
        while let Some(m) = queue.pop_front() {
            if !seen.insert(m.clone()) {
                continue;
            }
            if let Some(entry) = self.modules.get(m) {
                queue.extend(entry.imports.iter());
            }
        }
        seen
    }

    /// The unique symbol named `name` visible from `scope`.
    pub fn resolve_symbol(&self, name: &str, scope: &ModuleId) -> Result<SymbolId, ResolveError> {
        if !self.modules.contains_key(scope) {
            return Err(ResolveError::UnknownScope(scope.clone()));
        }
        self.resolve_in(name, std::slice::from_ref(scope))
    }

    /// Like [`resolve_symbol`](Self::resolve_symbol) over the union of
    /// several scopes.
    pub fn resolve_in(&self, name: &str, scopes: &[ModuleId]) -> Result<SymbolId, ResolveError> {
        let visible = self.visible_modules(scopes);
        let candidates: Vec<SymbolId> = self
            .symbols_named(name)
            .iter()
            .filter(|s| visible.contains(&s.module()))
            .cloned()
            .collect();
        pick(name, candidates)
    }

    /// Resolves against the whole corpus, for text with no usable scope.
    pub fn resolve_global(&self, name: &str) -> Result<SymbolId, ResolveError> {
        pick(name, self.symbols_named(name).to_vec())
    }

    /// The innermost section containing a fragment.
    pub fn section_of(&self, fragment_index: usize) -> Option<usize> {
        self.index
            .fragment_section
            .get(fragment_index)
            .copied()
            .flatten()
    }

    /// Section chain from the innermost section outwards.
    pub fn section_ancestors(&self, section: usize) -> Vec<usize> {
        let mut out = vec![section];
        let mut cur = section;
        while let Some(p) = self.sections[cur].parent {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Fragments of the `granularity`-level section around the symbol's
    /// first defining fragment. Without a section of that level the
    /// outermost enclosing section is used, and without any section the
    /// whole document.
    pub fn fragments_for_concept(
        &self,
        symbol: &SymbolId,
        granularity: Granularity,
    ) -> Result<&[Fragment], ResolveError> {
        let entry = self
            .symbols
            .get(symbol)
            .ok_or_else(|| ResolveError::UnknownSymbol(symbol.clone()))?;
        let Some(first) = entry.defining_fragments.first() else {
            return Ok(&[]);
        };
        let idx = self.index.fragment_by_id[first];
        let (start, end) = match self.section_of(idx) {
            Some(section) => {
                let chain = self.section_ancestors(section);
                let chosen = chain
                    .iter()
                    .copied()
                    .find(|&s| self.sections[s].level <= granularity)
                    .unwrap_or(*chain.last().expect("chain is never empty"));
                let node = &self.sections[chosen];
                (node.fragment_start, node.fragment_end)
            }
            None => {
                let doc = self
                    .documents
                    .iter()
                    .find(|d| d.doc_id == self.fragments[idx].doc_id)
                    .expect("fragment belongs to a document");
                (doc.fragment_start, doc.fragment_end)
            }
        };
        Ok(&self.fragments[start..end])
    }

    /// Symbols whose name or URI contains `query`, ignoring case. An empty
    /// query lists everything.
    pub fn find_symbols(&self, query: &str) -> Vec<&SymbolEntry> {
        let q = query.to_lowercase();
        self.symbols
            .values()
            .filter(|s| {
                q.is_empty()
                    || s.name.to_lowercase().contains(&q)
                    || s.id.0.to_lowercase().contains(&q)
            })
            .collect()
    }
}

fn pick(name: &str, mut candidates: Vec<SymbolId>) -> Result<SymbolId, ResolveError> {
    candidates.sort();
    candidates.dedup();
    match candidates.len() {
        0 => Err(ResolveError::Unknown(name.to_owned())),
        1 => Ok(candidates.pop().expect("one candidate")),
        _ => Err(ResolveError::Ambiguous {
            name: name.to_owned(),
            candidates,
        }),
    }
}
