//! Parsing and serialization of the sTeX subset used by course material
//! and generated questions.

mod node;
mod parser;
mod serialize;

pub use node::{
    attr, Descendants, Diagnostic, DocumentAst, NodeKind, Origin, SourceDocument, Span, StexNode,
    SymbolReference,
};
pub use parser::{parse_document, parse_snippet, split_options, ParseError};
pub use serialize::{serialize, serialize_nodes};

/// Every symbol reference in document order. `\sn{x}` verbalizes as `x`.
pub fn extract_symbol_references(ast: &DocumentAst) -> Vec<SymbolReference> {
    ast.root
        .descendants()
        .filter(|n| n.kind == NodeKind::SymbolRef)
        .map(|n| {
            let name = n.attr(attr::NAME).unwrap_or_default().to_owned();
            let verbalization = n
                .attr(attr::VERBALIZATION)
                .map(str::to_owned)
                .unwrap_or_else(|| name.clone());
            SymbolReference {
                name,
                verbalization,
                span: n.span,
            }
        })
        .collect()
}

/// Plain text of a node sequence: symbol references become their
/// verbalization, math keeps its source, markup is dropped.
pub fn plain_text(nodes: &[StexNode]) -> String {
    let mut out = String::new();
    for node in nodes {
        push_plain(node, &mut out);
    }
    out
}

fn push_plain(node: &StexNode, out: &mut String) {
    match node.kind {
        NodeKind::Text => out.push_str(node.attr(attr::TEXT).unwrap_or_default()),
        NodeKind::SymbolRef => out.push_str(
            node.attr(attr::VERBALIZATION)
                .or_else(|| node.attr(attr::NAME))
                .unwrap_or_default(),
        ),
        NodeKind::Math => out.push_str(node.attr(attr::CONTENT).unwrap_or_default()),
        NodeKind::FillInSol => out.push_str(node.attr(attr::SOLUTION).unwrap_or_default()),
        NodeKind::Group
        | NodeKind::Environment
        | NodeKind::ChoiceOption
        | NodeKind::Problem
        | NodeKind::Document
        | NodeKind::ModuleDecl
        | NodeKind::MultiChoiceBlock
        | NodeKind::SingleChoiceBlock => {
            if let Some(body) = node.attr(attr::VERBATIM) {
                out.push_str(body);
            }
            for child in &node.children {
                push_plain(child, out);
            }
        }
        NodeKind::SectionMarker => out.push_str(node.attr(attr::TITLE).unwrap_or_default()),
        NodeKind::UseModule | NodeKind::SymbolDecl | NodeKind::SymbolDef | NodeKind::Objective => {}
    }
}
