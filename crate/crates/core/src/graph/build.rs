use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::search::{boost_terms, term_counts};
use super::{
    DanglingImport, DanglingReason, DocumentInfo, Fragment, FragmentKind, GraphError, GraphWarning,
    ImportRef, Index, KnowledgeGraph, ModuleEntry, ModuleId, SectionNode, SymbolEntry, SymbolId,
};
use crate::exec::Execution;
use crate::stex::{attr, parse_document, split_options, NodeKind, SourceDocument, Span, StexNode};

pub fn build_graph(docs: &[SourceDocument]) -> Result<KnowledgeGraph, GraphError> {
    build_graph_with(docs, Execution::default())
}

pub fn build_graph_with(
    docs: &[SourceDocument],
    exec: Execution,
) -> Result<KnowledgeGraph, GraphError> {
    let mut seen = HashSet::new();
    for doc in docs {
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(GraphError::DuplicateDocument(doc.doc_id.clone()));
        }
    }
    let asts = exec
        .map(docs, |doc| {
            parse_document(doc).map_err(|source| GraphError::ParseFailure {
                doc_id: doc.doc_id.clone(),
                source,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut graph = KnowledgeGraph {
        documents: Vec::new(),
        modules: BTreeMap::new(),
        symbols: BTreeMap::new(),
        fragments: Vec::new(),
        sections: Vec::new(),
        section_roots: Vec::new(),
        warnings: Vec::new(),
        index: Index::default(),
    };

    let mut raw_imports = Vec::new();
    for ast in &asts {
        let mut collector = Collector {
            graph: &mut graph,
            doc_id: &ast.doc_id,
            modules: Vec::new(),
            imports: &mut raw_imports,
        };
        collector.walk(&ast.root.children, &mut Vec::new(), None)?;
        let modules = collector.modules;
        graph.documents.push(DocumentInfo {
            doc_id: ast.doc_id.clone(),
            modules,
            imports: Vec::new(),
            fragment_start: 0,
            fragment_end: 0,
        });
    }
    for symbol in graph.symbols.values() {
        graph
            .index
            .symbols_by_name
            .entry(symbol.name.clone())
            .or_default()
            .push(symbol.id.clone());
    }
    for module in graph.modules.values() {
        graph
            .index
            .modules_by_name
            .entry(module.name.clone())
            .or_default()
            .push(module.id.clone());
    }

    for raw in raw_imports {
        match resolve_import(&graph.index.modules_by_name, &raw.import, &raw.doc_id) {
            Ok(target) => {
                let list = match &raw.module {
                    Some(m) => &mut graph.modules.get_mut(m).expect("collected module").imports,
                    None => {
                        &mut graph
                            .documents
                            .iter_mut()
                            .find(|d| d.doc_id == raw.doc_id)
                            .expect("collected document")
                            .imports
                    }
                };
                if !list.contains(&target) {
                    list.push(target);
                }
            }
            Err(reason) => {
                if let Some(m) = &raw.module {
                    graph
                        .modules
                        .get_mut(m)
                        .expect("collected module")
                        .dangling_imports
                        .push(DanglingImport {
                            import: raw.import.clone(),
                            reason: reason.clone(),
                        });
                }
                graph.warnings.push(GraphWarning::DanglingImport {
                    doc_id: raw.doc_id,
                    module: raw.module,
                    import: raw.import,
                    reason,
                });
            }
        }
    }

    for (doc_index, ast) in asts.iter().enumerate() {
        let start = graph.fragments.len();
        let mut walker = FragmentWalker {
            src: &docs[doc_index].text,
            sections: &mut graph.sections,
            roots: &mut graph.section_roots,
            stack: Vec::new(),
            base: start,
            doc_id: &ast.doc_id,
            pending: Vec::new(),
            para: None,
        };
        walker.walk(&ast.root.children, None);
        walker.flush();
        let pending = walker.pending;
        for p in pending {
            add_fragment(&mut graph, doc_index, start, &docs[doc_index].text, p);
        }
        let doc = &mut graph.documents[doc_index];
        doc.fragment_start = start;
        doc.fragment_end = graph.fragments.len();
    }

    graph.index.fragment_by_id = graph
        .fragments
        .iter()
        .enumerate()
        .map(|(i, f)| (f.id.clone(), i))
        .collect();
    graph.index.term_counts = exec.map(&graph.fragments, |f| term_counts(&f.text));
    graph.index.boost_terms = graph
        .modules
        .values()
        .map(|m| {
            let names = m.symbols.iter().map(SymbolId::name);
            (m.id.clone(), boost_terms(names))
        })
        .collect();
    Ok(graph)
}

/// Splits an import path into the file part and the module name.
/// `mod?bijective` names module `bijective` in `mod/bijective.tex`;
/// `foo/bar` names module `bar` in `foo/bar.tex`.
fn split_import_path(path: &str) -> (Option<&str>, &str) {
    if let Some((p, m)) = path.rsplit_once('?') {
        ((!p.is_empty()).then_some(p), m)
    } else if let Some((_, m)) = path.rsplit_once('/') {
        (Some(path), m)
    } else {
        (None, path)
    }
}

pub(super) fn resolve_import(
    modules_by_name: &HashMap<String, Vec<ModuleId>>,
    import: &ImportRef,
    from_doc: &str,
) -> Result<ModuleId, DanglingReason> {
    let path = import.path.trim();
    let (dir, name) = split_import_path(path);
    let candidates = modules_by_name.get(name).map_or(&[][..], Vec::as_slice);
    // doc ids a matching module may live in, as path suffixes
    let suffixes: Vec<String> = match (import.archive.as_deref(), dir) {
        (Some(a), Some(p)) if path.contains('?') => {
            vec![format!("{a}/{p}/{name}"), format!("{a}/{p}")]
        }
        (None, Some(p)) if path.contains('?') => vec![format!("{p}/{name}"), p.to_owned()],
        (Some(a), Some(p)) => vec![format!("{a}/{p}")],
        (None, Some(p)) => vec![p.to_owned()],
        (Some(a), None) => vec![format!("{a}/{name}"), a.to_owned()],
        (None, None) => Vec::new(),
    };
    let mut matches: Vec<ModuleId> = if suffixes.is_empty() {
        let local: Vec<_> = candidates
            .iter()
            .filter(|m| m.doc_id() == from_doc)
            .cloned()
            .collect();
        if local.is_empty() {
            candidates.to_vec()
        } else {
            local
        }
    } else {
        candidates
            .iter()
            .filter(|m| {
                let doc = m.doc_id();
                suffixes
                    .iter()
                    .any(|s| doc == s || doc.ends_with(&format!("/{s}")))
            })
            .cloned()
            .collect()
    };
    matches.sort();
    matches.dedup();
    match matches.len() {
        0 => Err(DanglingReason::Missing),
        1 => Ok(matches.pop().expect("one match")),
        _ => Err(DanglingReason::Ambiguous {
            candidates: matches,
        }),
    }
}

struct RawImport {
    doc_id: String,
    module: Option<ModuleId>,
    import: ImportRef,
}

struct Collector<'a> {
    graph: &'a mut KnowledgeGraph,
    doc_id: &'a str,
    modules: Vec<ModuleId>,
    imports: &'a mut Vec<RawImport>,
}

impl Collector<'_> {
    fn walk(
        &mut self,
        nodes: &[StexNode],
        path: &mut Vec<String>,
        module: Option<&ModuleId>,
    ) -> Result<(), GraphError> {
        for node in nodes {
            match node.kind {
                NodeKind::ModuleDecl => {
                    let name = node.attr(attr::NAME).unwrap_or_default().trim().to_owned();
                    path.push(name.clone());
                    let id = ModuleId::new(self.doc_id, &path.join("/"));
                    if self.graph.modules.contains_key(&id) {
                        return Err(GraphError::DuplicateModule(id));
                    }
                    self.graph.modules.insert(
                        id.clone(),
                        ModuleEntry {
                            id: id.clone(),
                            name,
                            doc_id: self.doc_id.to_owned(),
                            imports: Vec::new(),
                            dangling_imports: Vec::new(),
                            symbols: Vec::new(),
                        },
                    );
                    self.modules.push(id.clone());
                    self.walk(&node.children, path, Some(&id))?;
                    path.pop();
                }
                NodeKind::UseModule => self.imports.push(RawImport {
                    doc_id: self.doc_id.to_owned(),
                    module: module.cloned(),
                    import: import_ref(node),
                }),
                NodeKind::SymbolDecl | NodeKind::SymbolDef => {
                    let name = node.attr(attr::NAME).unwrap_or_default().trim().to_owned();
                    let Some(module) = module else {
                        self.graph
                            .warnings
                            .push(GraphWarning::DeclarationOutsideModule {
                                doc_id: self.doc_id.to_owned(),
                                name,
                            });
                        continue;
                    };
                    let id = SymbolId::new(module, &name);
                    if self.graph.symbols.contains_key(&id) {
                        return Err(GraphError::DuplicateSymbol {
                            name,
                            module: module.clone(),
                        });
                    }
                    let declared_by = if node.kind == NodeKind::SymbolDecl {
                        "symdecl"
                    } else {
                        "symdef"
                    };
                    self.graph.symbols.insert(
                        id.clone(),
                        SymbolEntry {
                            id: id.clone(),
                            name,
                            module: module.clone(),
                            declared_by: declared_by.to_owned(),
                            defining_fragments: Vec::new(),
                        },
                    );
                    self.graph
                        .modules
                        .get_mut(module)
                        .expect("current module")
                        .symbols
                        .push(id);
                }
                _ => self.walk(&node.children, path, module)?,
            }
        }
        Ok(())
    }
}

pub(crate) fn import_ref(node: &StexNode) -> ImportRef {
    ImportRef {
        archive: node.attr(attr::ARCHIVE).map(|a| a.trim().to_owned()),
        path: node.attr(attr::PATH).unwrap_or_default().trim().to_owned(),
    }
}

struct PendingFragment {
    span: Span,
    kind: FragmentKind,
    module: Option<ModuleId>,
    section: Option<usize>,
    section_path: Vec<String>,
    references: Vec<String>,
    declared: Vec<SymbolId>,
    defines: Vec<String>,
}

struct Paragraph<'a> {
    start: usize,
    end: usize,
    nodes: Vec<&'a StexNode>,
}

struct FragmentWalker<'a, 's> {
    src: &'s str,
    sections: &'a mut Vec<SectionNode>,
    roots: &'a mut Vec<usize>,
    stack: Vec<usize>,
    base: usize,
    doc_id: &'s str,
    pending: Vec<PendingFragment>,
    para: Option<(Paragraph<'s>, Option<ModuleId>)>,
}

impl<'s> FragmentWalker<'_, 's> {
    fn walk(&mut self, nodes: &'s [StexNode], module: Option<&ModuleId>) {
        for node in nodes {
            match node.kind {
                NodeKind::Text => {
                    let text = node.attr(attr::TEXT).unwrap_or_default();
                    let mut cursor = node.span.start;
                    for (b_start, b_end) in blank_line_breaks(text) {
                        self.extend(cursor, node.span.start + b_start, None, module);
                        self.flush();
                        cursor = node.span.start + b_end;
                    }
                    self.extend(cursor, node.span.end, None, module);
                }
                NodeKind::SectionMarker => {
                    self.flush();
                    self.open_section(node);
                }
                NodeKind::ModuleDecl => {
                    self.flush();
                    let path = self.module_path(module, node);
                    self.walk(&node.children, Some(&path));
                    self.flush();
                }
                NodeKind::Environment if node.attr(attr::NAME) == Some("document") => {
                    self.flush();
                    self.walk(&node.children, module);
                    self.flush();
                }
                NodeKind::Environment
                | NodeKind::Problem
                | NodeKind::MultiChoiceBlock
                | NodeKind::SingleChoiceBlock => {
                    self.flush();
                    let kind = match node.kind {
                        NodeKind::Environment => FragmentKind::from_environment(
                            node.attr(attr::NAME).unwrap_or_default(),
                        ),
                        _ => FragmentKind::Plain,
                    };
                    let mut defines = Vec::new();
                    if kind == FragmentKind::Definition {
                        defines = for_targets(node);
                    }
                    self.emit(node.span, kind, module, &[node], defines);
                }
                _ => self.extend(node.span.start, node.span.end, Some(node), module),
            }
        }
    }

    fn module_path(&self, parent: Option<&ModuleId>, node: &StexNode) -> ModuleId {
        let name = node.attr(attr::NAME).unwrap_or_default().trim();
        match parent {
            Some(p) => ModuleId::new(self.doc_id, &format!("{}/{name}", p.path())),
            None => ModuleId::new(self.doc_id, name),
        }
    }

    fn extend(
        &mut self,
        start: usize,
        end: usize,
        node: Option<&'s StexNode>,
        module: Option<&ModuleId>,
    ) {
        let piece = &self.src[start..end];
        let trimmed_start = start + (piece.len() - piece.trim_start().len());
        let trimmed_end = end - (piece.len() - piece.trim_end().len());
        if trimmed_start >= trimmed_end && node.is_none() {
            return;
        }
        let para = self.para.get_or_insert_with(|| {
            (
                Paragraph {
                    start: trimmed_start,
                    end: trimmed_end,
                    nodes: Vec::new(),
                },
                module.cloned(),
            )
        });
        para.0.start = para.0.start.min(trimmed_start);
        para.0.end = para.0.end.max(trimmed_end);
        if let Some(n) = node {
            para.0.nodes.push(n);
        }
    }

    fn flush(&mut self) {
        let Some((para, module)) = self.para.take() else {
            return;
        };
        let text = &self.src[para.start..para.end];
        if text
            .lines()
            .all(|l| l.trim().is_empty() || l.trim_start().starts_with('%'))
        {
            return;
        }
        self.emit(
            Span::new(para.start, para.end),
            FragmentKind::Plain,
            module.as_ref(),
            &para.nodes,
            Vec::new(),
        );
    }

    fn emit(
        &mut self,
        span: Span,
        kind: FragmentKind,
        module: Option<&ModuleId>,
        nodes: &[&StexNode],
        defines: Vec<String>,
    ) {
        let index = self.base + self.pending.len();
        for &s in &self.stack {
            self.sections[s].fragment_end = index + 1;
        }
        let mut references = Vec::new();
        let mut declared = Vec::new();
        for node in nodes {
            for n in node.descendants() {
                match n.kind {
                    NodeKind::SymbolRef => {
                        references.push(n.attr(attr::NAME).unwrap_or_default().trim().to_owned())
                    }
                    NodeKind::SymbolDecl | NodeKind::SymbolDef => {
                        if let Some(m) = module {
                            declared.push(SymbolId::new(
                                m,
                                n.attr(attr::NAME).unwrap_or_default().trim(),
                            ));
                        }
                    }
                    _ => {}
                }
            }
        }
        self.pending.push(PendingFragment {
            span,
            kind,
            module: module.cloned(),
            section: self.stack.last().copied(),
            section_path: self
                .stack
                .iter()
                .map(|&s| self.sections[s].title.clone())
                .collect(),
            references,
            declared,
            defines,
        });
    }

    fn open_section(&mut self, node: &StexNode) {
        let Some(level) = node
            .attr(attr::MACRO)
            .and_then(super::Granularity::from_macro)
        else {
            return;
        };
        while let Some(&top) = self.stack.last() {
            if self.sections[top].level >= level {
                self.stack.pop();
            } else {
                break;
            }
        }
        let index = self.sections.len();
        let parent = self.stack.last().copied();
        let here = self.base + self.pending.len();
        self.sections.push(SectionNode {
            title: node.attr(attr::TITLE).unwrap_or_default().trim().to_owned(),
            level,
            doc_id: self.doc_id.to_owned(),
            parent,
            children: Vec::new(),
            fragment_start: here,
            fragment_end: here,
        });
        match parent {
            Some(p) => self.sections[p].children.push(index),
            None => self.roots.push(index),
        }
        self.stack.push(index);
    }
}

/// `for=` targets of a definition environment.
fn for_targets(node: &StexNode) -> Vec<String> {
    let Some(opts) = node.attr(attr::OPTS) else {
        return Vec::new();
    };
    split_options(opts)
        .into_iter()
        .filter(|(k, _)| k.as_deref() == Some("for"))
        .flat_map(|(_, v)| {
            v.split(',')
                .map(|s| s.trim().to_owned())
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Byte ranges of blank-line runs that separate paragraphs.
fn blank_line_breaks(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'\n' {
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i + 1;
        let mut last_newline = i;
        let mut newlines = 1;
        while j < bytes.len() && matches!(bytes[j], b' ' | b'\t' | b'\r' | b'\n') {
            if bytes[j] == b'\n' {
                newlines += 1;
                last_newline = j;
            }
            j += 1;
        }
        if newlines >= 2 {
            out.push((start, last_newline + 1));
        }
        i = j.max(i + 1);
    }
    out
}

fn add_fragment(
    graph: &mut KnowledgeGraph,
    doc_index: usize,
    doc_start: usize,
    src: &str,
    p: PendingFragment,
) {
    let doc = &graph.documents[doc_index];
    let ordinal = graph.fragments.len() - doc_start + 1;
    let id = format!("{}#{ordinal}", doc.doc_id);
    let scope: Vec<ModuleId> = match &p.module {
        Some(m) => vec![m.clone()],
        None => doc.modules.iter().chain(&doc.imports).cloned().collect(),
    };
    let mut mentioned: BTreeSet<SymbolId> = p
        .declared
        .iter()
        .filter(|s| graph.symbols.contains_key(*s))
        .cloned()
        .collect();
    let mut unresolved = Vec::new();
    let mut resolve = |name: &str| -> Option<SymbolId> {
        match graph.resolve_in(name, &scope) {
            Ok(s) => Some(s),
            Err(_) => {
                unresolved.push(name.to_owned());
                None
            }
        }
    };
    for name in &p.references {
        if let Some(s) = resolve(name) {
            mentioned.insert(s);
        }
    }
    let mut defines: Vec<SymbolId> = Vec::new();
    for name in &p.defines {
        if let Some(s) = resolve(name) {
            mentioned.insert(s.clone());
            defines.push(s);
        }
    }
    if p.kind == FragmentKind::Definition {
        defines.extend(
            p.declared
                .iter()
                .filter(|s| graph.symbols.contains_key(*s))
                .cloned(),
        );
    }
    let doc_id = graph.documents[doc_index].doc_id.clone();
    for name in unresolved {
        graph.warnings.push(GraphWarning::UnresolvedReference {
            fragment: id.clone(),
            name,
        });
    }
    for s in defines {
        let entry = graph.symbols.get_mut(&s).expect("resolved symbol exists");
        if !entry.defining_fragments.contains(&id) {
            entry.defining_fragments.push(id.clone());
        }
    }
    graph.index.fragment_section.push(p.section);
    graph.fragments.push(Fragment {
        id,
        doc_id,
        kind: p.kind,
        section_path: p.section_path,
        text: src[p.span.start..p.span.end].to_owned(),
        span: p.span,
        module: p.module,
        mentioned_symbols: mentioned,
    });
}
