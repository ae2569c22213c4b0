use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Byte range into the source text a node was parsed from.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shifted(self, by: usize) -> Self {
        Self::new(self.start + by, self.end + by)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Document,
    ModuleDecl,
    UseModule,
    SymbolDecl,
    SymbolDef,
    SymbolRef,
    Problem,
    MultiChoiceBlock,
    SingleChoiceBlock,
    ChoiceOption,
    FillInSol,
    Objective,
    SectionMarker,
    Text,
    Math,
    Environment,
    /// A bare `{...}` group that is not the argument of a recognized macro.
    Group,
}

/// Attribute keys used on [`StexNode`]s.
pub mod attr {
    pub const NAME: &str = "name";
    pub const MACRO: &str = "macro";
    pub const OPTS: &str = "opts";
    pub const ARCHIVE: &str = "archive";
    pub const PATH: &str = "path";
    pub const STAR: &str = "star";
    pub const NOTATION: &str = "notation";
    pub const VERBALIZATION: &str = "verbalization";
    pub const TRUTH: &str = "truth";
    pub const FEEDBACK: &str = "feedback";
    pub const SET: &str = "set";
    pub const ADD: &str = "add";
    pub const DEDUCT: &str = "deduct";
    pub const EXTRA: &str = "extra";
    pub const SOLUTION: &str = "solution";
    pub const DIMENSION: &str = "dimension";
    pub const SYMBOL: &str = "symbol";
    pub const SHORT: &str = "short";
    pub const TITLE: &str = "title";
    pub const TEXT: &str = "text";
    pub const DELIM: &str = "delim";
    pub const CONTENT: &str = "content";
    pub const VERBATIM: &str = "verbatim";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StexNode {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<StexNode>,
    pub span: Span,
}

impl StexNode {
    pub fn new(kind: NodeKind, span: Span) -> Self {
        Self {
            kind,
            attributes: BTreeMap::new(),
            children: Vec::new(),
            span,
        }
    }

    pub fn text(text: impl Into<String>, span: Span) -> Self {
        Self::new(NodeKind::Text, span).with_attr(attr::TEXT, text)
    }

    pub fn with_attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attributes.insert(key.to_owned(), value.into());
        self
    }

    pub fn with_children(mut self, children: Vec<StexNode>) -> Self {
        self.children = children;
        self
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }

    /// Same kind, attributes and children, ignoring spans.
    pub fn same_structure(&self, other: &StexNode) -> bool {
        self.kind == other.kind
            && self.attributes == other.attributes
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_structure(b))
    }

    /// Pre-order traversal including `self`.
    pub fn descendants(&self) -> Descendants<'_> {
        Descendants { stack: vec![self] }
    }

    pub fn is_choice_block(&self) -> bool {
        matches!(
            self.kind,
            NodeKind::MultiChoiceBlock | NodeKind::SingleChoiceBlock
        )
    }
}

pub struct Descendants<'a> {
    stack: Vec<&'a StexNode>,
}

impl<'a> Iterator for Descendants<'a> {
    type Item = &'a StexNode;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    CourseMaterial,
    GeneratedOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub text: String,
    pub origin: Origin,
}

impl SourceDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, origin: Origin) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            origin,
        }
    }

    pub fn course(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(doc_id, text, Origin::CourseMaterial)
    }

    pub fn generated(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(doc_id, text, Origin::GeneratedOutput)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub message: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentAst {
    pub root: StexNode,
    pub doc_id: String,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl DocumentAst {
    pub fn same_structure(&self, other: &DocumentAst) -> bool {
        self.root.same_structure(&other.root)
    }
}

/// One symbol reference found in a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolReference {
    pub name: String,
    pub verbalization: String,
    pub span: Span,
}
