use serde::{Deserialize, Serialize};

use super::{Dimension, QuizQuestion, ResolvedPair};
use crate::graph::{DanglingReason, ImportRef, KnowledgeGraph, ModuleId, ResolveError, SymbolId};
use crate::stex::{attr, NodeKind, Span, StexNode};

/// The modules a question's symbol names resolve against: its resolved
/// `\usemodule`s plus the module it sits in.
#[derive(Debug, Clone)]
pub struct QuestionScope {
    pub modules: Vec<ModuleId>,
    pub dangling: Vec<(ImportRef, Span, DanglingReason)>,
}

impl QuestionScope {
    pub fn new(q: &QuizQuestion, graph: &KnowledgeGraph) -> Self {
        let doc_id = q.doc_id();
        let mut modules = Vec::new();
        let mut dangling = Vec::new();
        for (import, span) in q.used_modules.iter().zip(&q.used_module_spans) {
            match graph.resolve_import(import, doc_id) {
                Ok(m) => modules.push(m),
                Err(reason) => dangling.push((import.clone(), *span, reason)),
            }
        }
        if let Some(m) = &q.enclosing_module {
            let id = ModuleId(m.clone());
            if graph.modules.contains_key(&id) {
                modules.push(id);
            }
        }
        modules.sort();
        modules.dedup();
        QuestionScope { modules, dangling }
    }

    /// Resolves within scope; with no usable scope the whole corpus is
    /// searched instead.
    pub fn resolve(&self, graph: &KnowledgeGraph, name: &str) -> Result<SymbolId, ResolveError> {
        if self.modules.is_empty() {
            graph.resolve_global(name)
        } else {
            graph.resolve_in(name, &self.modules)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedSymbol {
    pub name: String,
    pub span: Span,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prerequisites {
    pub pairs: Vec<ResolvedPair>,
    pub unresolved: Vec<UnresolvedSymbol>,
}

/// Explicit `\precondition`s plus `(remember, s)` for every symbol
/// referenced in the stem or an option text. Feedback is not part of the
/// body and contributes nothing.
pub fn extract_prerequisites(q: &QuizQuestion, graph: &KnowledgeGraph) -> Prerequisites {
    let scope = QuestionScope::new(q, graph);
    let mut out = Prerequisites::default();
    let add = |dimension: Dimension, name: &str, span: Span, out: &mut Prerequisites| match scope
        .resolve(graph, name)
    {
        Ok(symbol) => out.pairs.push(ResolvedPair { dimension, symbol }),
        Err(e) => out.unresolved.push(UnresolvedSymbol {
            name: name.to_owned(),
            span,
            error: e.to_string(),
        }),
    };
    for pair in &q.preconditions {
        // an invalid keyword is the validator's business, not a prerequisite
        if let Some(dim) = pair.parsed_dimension() {
            add(dim, &pair.symbol, pair.span, &mut out);
        }
    }
    for node in body_references(q) {
        add(
            Dimension::Remember,
            node.attr(attr::NAME).unwrap_or_default(),
            node.span,
            &mut out,
        );
    }
    out.pairs
        .sort_by(|a, b| a.symbol.cmp(&b.symbol).then(a.dimension.cmp(&b.dimension)));
    out.pairs.dedup();
    out
}

/// Symbol references in the stem and option texts, in document order.
pub(crate) fn body_references(q: &QuizQuestion) -> impl Iterator<Item = &StexNode> {
    q.stem
        .iter()
        .chain(q.options.iter().flat_map(|o| o.text.iter()))
        .flat_map(StexNode::descendants)
        .filter(|n| n.kind == NodeKind::SymbolRef)
}
