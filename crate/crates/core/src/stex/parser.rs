//! Recursive-descent parser for the sTeX subset.
//!
//! The parser is total on input whose braces and `\begin`/`\end` pairs are
//! balanced. Anything it does not recognize is kept as [`NodeKind::Text`],
//! [`NodeKind::Group`] or [`NodeKind::Environment`] so that serializing the
//! tree reproduces every construct. Math is opaque: its interior is stored
//! verbatim and never inspected.

use thiserror::Error;

use super::node::{attr, Diagnostic, DocumentAst, NodeKind, SourceDocument, Span, StexNode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unbalanced braces at byte {}", span.start)]
    UnbalancedBraces { span: Span },
    #[error("environment `{name}` opened at byte {} is never closed", span.start)]
    UnclosedEnvironment { name: String, span: Span },
    #[error("`\\end{{{found}}}` at byte {} does not close `{expected}`", span.start)]
    MismatchedEnd {
        expected: String,
        found: String,
        span: Span,
    },
    #[error("`\\end{{{name}}}` at byte {} has no matching `\\begin`", span.start)]
    UnexpectedEnd { name: String, span: Span },
    #[error("math opened with `{delim}` at byte {} is never closed", span.start)]
    UnclosedMath { delim: String, span: Span },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::UnbalancedBraces { span }
            | ParseError::UnclosedEnvironment { span, .. }
            | ParseError::MismatchedEnd { span, .. }
            | ParseError::UnexpectedEnd { span, .. }
            | ParseError::UnclosedMath { span, .. } => *span,
        }
    }

    fn shifted(self, by: usize) -> Self {
        match self {
            ParseError::UnbalancedBraces { span } => ParseError::UnbalancedBraces {
                span: span.shifted(by),
            },
            ParseError::UnclosedEnvironment { name, span } => ParseError::UnclosedEnvironment {
                name,
                span: span.shifted(by),
            },
            ParseError::MismatchedEnd {
                expected,
                found,
                span,
            } => ParseError::MismatchedEnd {
                expected,
                found,
                span: span.shifted(by),
            },
            ParseError::UnexpectedEnd { name, span } => ParseError::UnexpectedEnd {
                name,
                span: span.shifted(by),
            },
            ParseError::UnclosedMath { delim, span } => ParseError::UnclosedMath {
                delim,
                span: span.shifted(by),
            },
        }
    }
}

/// Environments whose bodies are kept verbatim.
const VERBATIM_ENVS: &[&str] = &["verbatim", "lstlisting", "minted", "comment"];

pub fn parse_document(doc: &SourceDocument) -> Result<DocumentAst, ParseError> {
    let mut parser = Parser::new(&doc.text);
    let children = parser.parse_seq(&Stop::Eof, Container::Flow)?;
    let root =
        StexNode::new(NodeKind::Document, Span::new(0, doc.text.len())).with_children(children);
    Ok(DocumentAst {
        root,
        doc_id: doc.doc_id.clone(),
        diagnostics: parser.diagnostics,
    })
}

/// Parses a snippet whose spans are reported relative to `offset`.
pub fn parse_snippet(text: &str, offset: usize) -> Result<Vec<StexNode>, ParseError> {
    let mut parser = Parser::new(text);
    let mut nodes = parser
        .parse_seq(&Stop::Eof, Container::Flow)
        .map_err(|e| e.shifted(offset))?;
    if offset > 0 {
        for node in &mut nodes {
            shift_spans(node, offset);
        }
    }
    Ok(nodes)
}

fn shift_spans(node: &mut StexNode, by: usize) {
    node.span = node.span.shifted(by);
    for child in &mut node.children {
        shift_spans(child, by);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stop {
    Eof,
    Brace { open: usize },
    End { name: String, open: Span },
}

impl Stop {
    fn unclosed_error(&self) -> Option<ParseError> {
        match self {
            Stop::Eof => None,
            Stop::Brace { open } => Some(ParseError::UnbalancedBraces {
                span: Span::new(*open, *open + 1),
            }),
            Stop::End { name, open } => Some(ParseError::UnclosedEnvironment {
                name: name.clone(),
                span: *open,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Container {
    Flow,
    ChoiceBlock,
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

/// A scanned `{...}` or `[...]` argument.
#[derive(Debug, Clone, Copy)]
struct Arg {
    inner: Span,
    end: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            diagnostics: Vec::new(),
        }
    }

    fn slice(&self, span: Span) -> &'a str {
        &self.src[span.start..span.end]
    }

    fn warn(&mut self, message: impl Into<String>, span: Span) {
        self.diagnostics.push(Diagnostic {
            message: message.into(),
            span,
        });
    }

    fn parse_seq(
        &mut self,
        stop: &Stop,
        container: Container,
    ) -> Result<Vec<StexNode>, ParseError> {
        match self.parse_seq_inner(stop, container) {
            // An inner construct that hits EOF is reported through the
            // outermost open construct, which has the earliest offset.
            Err(e) if self.pos >= self.bytes.len() && is_eof_error(&e) => {
                Err(stop.unclosed_error().unwrap_or(e))
            }
            other => other,
        }
    }

    fn parse_seq_inner(
        &mut self,
        stop: &Stop,
        container: Container,
    ) -> Result<Vec<StexNode>, ParseError> {
        let mut out = Vec::new();
        let mut text_start = self.pos;
        loop {
            if self.pos >= self.bytes.len() {
                if let Some(err) = stop.unclosed_error() {
                    return Err(err);
                }
                self.flush_text(&mut out, text_start, self.pos);
                return Ok(out);
            }
            let here = self.pos;
            match self.bytes[here] {
                b'%' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                    if self.pos < self.bytes.len() {
                        self.pos += 1;
                    }
                }
                b'$' => {
                    let node = self.parse_dollar_math()?;
                    self.flush_text(&mut out, text_start, here);
                    out.push(node);
                    text_start = self.pos;
                }
                b'{' => {
                    self.pos += 1;
                    let children = self.parse_seq(&Stop::Brace { open: here }, Container::Flow)?;
                    self.flush_text(&mut out, text_start, here);
                    out.push(
                        StexNode::new(NodeKind::Group, Span::new(here, self.pos))
                            .with_children(children),
                    );
                    text_start = self.pos;
                }
                b'}' => {
                    if matches!(stop, Stop::Brace { .. }) {
                        self.flush_text(&mut out, text_start, here);
                        self.pos += 1;
                        return Ok(out);
                    }
                    return Err(ParseError::UnbalancedBraces {
                        span: Span::new(here, here + 1),
                    });
                }
                b'\\' => {
                    if let Some(node) = self.parse_control(stop, container, &mut out, text_start)? {
                        match node {
                            Control::Node(node) => {
                                self.flush_text(&mut out, text_start, here);
                                out.push(node);
                                text_start = self.pos;
                            }
                            Control::Closed => return Ok(out),
                        }
                    }
                }
                _ => self.pos += 1,
            }
        }
    }

    fn flush_text(&self, out: &mut Vec<StexNode>, start: usize, end: usize) {
        if start < end {
            out.push(StexNode::text(&self.src[start..end], Span::new(start, end)));
        }
    }

    /// Handles a backslash at `self.pos`. Returns `None` when the control
    /// sequence is plain text (the position is advanced past it).
    fn parse_control(
        &mut self,
        stop: &Stop,
        container: Container,
        out: &mut Vec<StexNode>,
        text_start: usize,
    ) -> Result<Option<Control>, ParseError> {
        let start = self.pos;
        let name_start = start + 1;
        let mut name_end = name_start;
        while name_end < self.bytes.len() && self.bytes[name_end].is_ascii_alphabetic() {
            name_end += 1;
        }
        if name_end == name_start {
            // control symbol
            return match self.bytes.get(name_start) {
                Some(b'[') => self
                    .parse_delimited_math(start, "\\[", "\\]")
                    .map(|n| Some(Control::Node(n))),
                Some(b'(') => self
                    .parse_delimited_math(start, "\\(", "\\)")
                    .map(|n| Some(Control::Node(n))),
                Some(_) => {
                    // keep multi-byte characters intact
                    let ch_len = self.src[name_start..]
                        .chars()
                        .next()
                        .map_or(1, char::len_utf8);
                    self.pos = name_start + ch_len;
                    Ok(None)
                }
                None => {
                    self.pos = name_start;
                    Ok(None)
                }
            };
        }
        let src = self.src;
        let name = &src[name_start..name_end];
        self.pos = name_end;
        let node = match name {
            "begin" => return self.parse_begin(start).map(|n| n.map(Control::Node)),
            "end" => {
                let Some(arg) = self.brace_arg(self.pos, false) else {
                    return Ok(None);
                };
                let env = self.slice(arg.inner).to_owned();
                let span = Span::new(start, arg.end);
                return match stop {
                    Stop::End { name, .. } if *name == env => {
                        self.flush_text(out, text_start, start);
                        self.pos = arg.end;
                        Ok(Some(Control::Closed))
                    }
                    Stop::End { name, .. } => Err(ParseError::MismatchedEnd {
                        expected: name.clone(),
                        found: env,
                        span,
                    }),
                    Stop::Brace { open } => Err(ParseError::UnbalancedBraces {
                        span: Span::new(*open, *open + 1),
                    }),
                    Stop::Eof => Err(ParseError::UnexpectedEnd { name: env, span }),
                };
            }
            "usemodule" | "importmodule" => self.parse_usemodule(start, name),
            "symdecl" => self.parse_symdecl(start),
            "symdef" => self.parse_symdef(start),
            "symref" | "sr" => self.parse_symref(start, name),
            "sn" => self.brace_arg(self.pos, true).map(|arg| {
                self.pos = arg.end;
                StexNode::new(NodeKind::SymbolRef, Span::new(start, arg.end))
                    .with_attr(attr::MACRO, "sn")
                    .with_attr(attr::NAME, self.slice(arg.inner))
            }),
            "mcc" | "scc" => {
                if container == Container::ChoiceBlock {
                    return self.parse_choice(start, name).map(|n| n.map(Control::Node));
                }
                self.warn(
                    format!("`\\{name}` outside a choice block is kept as text"),
                    Span::new(start, name_end),
                );
                None
            }
            "fillinsol" => self.parse_fillinsol(start),
            "objective" | "precondition" => self.parse_objective(start, name),
            "chapter" | "section" | "subsection" => self.parse_section(start, name),
            _ => None,
        };
        if node.is_none() && is_recognized_macro(name) && !matches!(name, "mcc" | "scc") {
            self.pos = name_end;
            self.warn(
                format!("`\\{name}` is missing its arguments and is kept as text"),
                Span::new(start, name_end),
            );
        }
        Ok(node.map(Control::Node))
    }

    fn parse_begin(&mut self, start: usize) -> Result<Option<StexNode>, ParseError> {
        let Some(name_arg) = self.brace_arg(self.pos, false) else {
            return Ok(None);
        };
        let env = self.slice(name_arg.inner).to_owned();
        let head_end = name_arg.end;
        let begin_span = Span::new(start, head_end);
        self.pos = head_end;

        if VERBATIM_ENVS.contains(&env.as_str()) {
            let closing = format!("\\end{{{env}}}");
            let Some(rel) = self.src[head_end..].find(&closing) else {
                return Err(ParseError::UnclosedEnvironment {
                    name: env,
                    span: begin_span,
                });
            };
            let src = self.src;
            let body = &src[head_end..head_end + rel];
            self.pos = head_end + rel + closing.len();
            return Ok(Some(
                StexNode::new(NodeKind::Environment, Span::new(start, self.pos))
                    .with_attr(attr::NAME, env)
                    .with_attr(attr::VERBATIM, body),
            ));
        }

        let opts = self.bracket_arg(self.pos, false);
        if let Some(o) = opts {
            self.pos = o.end;
        }
        let mut node = match env.as_str() {
            "smodule" => {
                let Some(name) = self.brace_arg(self.pos, true) else {
                    self.warn(
                        "smodule without a name is kept as a plain environment",
                        begin_span,
                    );
                    return self.finish_env(
                        start,
                        begin_span,
                        &env,
                        opts,
                        NodeKind::Environment,
                        Container::Flow,
                    );
                };
                self.pos = name.end;
                StexNode::new(NodeKind::ModuleDecl, Span::default())
                    .with_attr(attr::NAME, self.slice(name.inner))
            }
            "sproblem" => StexNode::new(NodeKind::Problem, Span::default()),
            "mcb" => StexNode::new(NodeKind::MultiChoiceBlock, Span::default()),
            "scb" => StexNode::new(NodeKind::SingleChoiceBlock, Span::default()),
            _ => {
                return self.finish_env(
                    start,
                    begin_span,
                    &env,
                    opts,
                    NodeKind::Environment,
                    Container::Flow,
                )
            }
        };
        if let Some(o) = opts {
            node = node.with_attr(attr::OPTS, self.slice(o.inner));
        }
        let container = if node.is_choice_block() {
            Container::ChoiceBlock
        } else {
            Container::Flow
        };
        let stop = Stop::End {
            name: env,
            open: begin_span,
        };
        node.children = self.parse_seq(&stop, container)?;
        node.span = Span::new(start, self.pos);
        Ok(Some(node))
    }

    fn finish_env(
        &mut self,
        start: usize,
        begin_span: Span,
        env: &str,
        opts: Option<Arg>,
        kind: NodeKind,
        container: Container,
    ) -> Result<Option<StexNode>, ParseError> {
        let mut node = StexNode::new(kind, Span::default()).with_attr(attr::NAME, env);
        if let Some(o) = opts {
            node = node.with_attr(attr::OPTS, self.slice(o.inner));
        }
        let stop = Stop::End {
            name: env.to_owned(),
            open: begin_span,
        };
        node.children = self.parse_seq(&stop, container)?;
        node.span = Span::new(start, self.pos);
        Ok(Some(node))
    }

    fn parse_usemodule(&mut self, start: usize, name: &str) -> Option<StexNode> {
        let archive = self.bracket_arg(self.pos, false);
        let after = archive.map_or(self.pos, |a| a.end);
        let path = self.brace_arg(after, true)?;
        self.pos = path.end;
        let mut node = StexNode::new(NodeKind::UseModule, Span::new(start, path.end))
            .with_attr(attr::MACRO, name)
            .with_attr(attr::PATH, self.slice(path.inner));
        if let Some(a) = archive {
            node = node.with_attr(attr::ARCHIVE, self.slice(a.inner));
        }
        Some(node)
    }

    fn parse_symdecl(&mut self, start: usize) -> Option<StexNode> {
        let star = self.bytes.get(self.pos) == Some(&b'*');
        let after_star = self.pos + usize::from(star);
        let name = self.brace_arg(after_star, true)?;
        let opts = self.bracket_arg(name.end, false);
        let end = opts.map_or(name.end, |o| o.end);
        self.pos = end;
        let mut node = StexNode::new(NodeKind::SymbolDecl, Span::new(start, end))
            .with_attr(attr::MACRO, "symdecl")
            .with_attr(attr::NAME, self.slice(name.inner));
        if star {
            node = node.with_attr(attr::STAR, "*");
        }
        if let Some(o) = opts {
            node = node.with_attr(attr::OPTS, self.slice(o.inner));
        }
        Some(node)
    }

    fn parse_symdef(&mut self, start: usize) -> Option<StexNode> {
        let name = self.brace_arg(self.pos, true)?;
        let opts = self.bracket_arg(name.end, false);
        let after_opts = opts.map_or(name.end, |o| o.end);
        let notation = self.brace_arg(after_opts, true);
        let end = notation.map_or(after_opts, |n| n.end);
        self.pos = end;
        let mut node = StexNode::new(NodeKind::SymbolDef, Span::new(start, end))
            .with_attr(attr::MACRO, "symdef")
            .with_attr(attr::NAME, self.slice(name.inner));
        if let Some(o) = opts {
            node = node.with_attr(attr::OPTS, self.slice(o.inner));
        }
        if let Some(n) = notation {
            node = node.with_attr(attr::NOTATION, self.slice(n.inner));
        }
        Some(node)
    }

    fn parse_symref(&mut self, start: usize, macro_name: &str) -> Option<StexNode> {
        let name = self.brace_arg(self.pos, true)?;
        let verb = self.brace_arg(name.end, true)?;
        self.pos = verb.end;
        Some(
            StexNode::new(NodeKind::SymbolRef, Span::new(start, verb.end))
                .with_attr(attr::MACRO, macro_name)
                .with_attr(attr::NAME, self.slice(name.inner))
                .with_attr(attr::VERBALIZATION, self.slice(verb.inner)),
        )
    }

    fn parse_choice(
        &mut self,
        start: usize,
        macro_name: &str,
    ) -> Result<Option<StexNode>, ParseError> {
        let opts = self.bracket_arg(self.pos, false);
        let after_opts = opts.map_or(self.pos, |o| o.end);
        let body_open = skip_ws(self.bytes, after_opts);
        if self.bytes.get(body_open) != Some(&b'{') {
            self.warn(
                format!("`\\{macro_name}` without an answer is kept as text"),
                Span::new(start, self.pos),
            );
            return Ok(None);
        }
        let mut node = StexNode::new(NodeKind::ChoiceOption, Span::default())
            .with_attr(attr::MACRO, macro_name);
        if let Some(o) = opts {
            for (key, value) in split_options(self.slice(o.inner)) {
                match key.as_deref() {
                    None if value == "T" || value == "F" => {
                        node = node.with_attr(attr::TRUTH, value);
                    }
                    Some(k @ (attr::FEEDBACK | attr::SET | attr::ADD | attr::DEDUCT))
                        if !node.attributes.contains_key(k) =>
                    {
                        node = node.with_attr(k, value);
                    }
                    _ => {
                        let item = match key {
                            Some(k) => format!("{k}={value}"),
                            None => value,
                        };
                        let extra = match node.attr(attr::EXTRA) {
                            Some(prev) => format!("{prev},{item}"),
                            None => item,
                        };
                        node = node.with_attr(attr::EXTRA, extra);
                    }
                }
            }
        }
        self.pos = body_open + 1;
        node.children = self.parse_seq(&Stop::Brace { open: body_open }, Container::Flow)?;
        node.span = Span::new(start, self.pos);
        Ok(Some(node))
    }

    fn parse_fillinsol(&mut self, start: usize) -> Option<StexNode> {
        let opts = self.bracket_arg(self.pos, false);
        let after = opts.map_or(self.pos, |o| o.end);
        let sol = self.brace_arg(after, true)?;
        self.pos = sol.end;
        let mut node = StexNode::new(NodeKind::FillInSol, Span::new(start, sol.end))
            .with_attr(attr::SOLUTION, self.slice(sol.inner));
        if let Some(o) = opts {
            node = node.with_attr(attr::OPTS, self.slice(o.inner));
        }
        Some(node)
    }

    fn parse_objective(&mut self, start: usize, macro_name: &str) -> Option<StexNode> {
        let dim = self.brace_arg(self.pos, true)?;
        let sym = self.brace_arg(dim.end, true)?;
        self.pos = sym.end;
        Some(
            StexNode::new(NodeKind::Objective, Span::new(start, sym.end))
                .with_attr(attr::MACRO, macro_name)
                .with_attr(attr::DIMENSION, self.slice(dim.inner).trim())
                .with_attr(attr::SYMBOL, self.slice(sym.inner).trim()),
        )
    }

    fn parse_section(&mut self, start: usize, macro_name: &str) -> Option<StexNode> {
        let star = self.bytes.get(self.pos) == Some(&b'*');
        let after_star = self.pos + usize::from(star);
        let short = self.bracket_arg(after_star, false);
        let after_short = short.map_or(after_star, |s| s.end);
        let title = self.brace_arg(after_short, true)?;
        self.pos = title.end;
        let mut node = StexNode::new(NodeKind::SectionMarker, Span::new(start, title.end))
            .with_attr(attr::MACRO, macro_name)
            .with_attr(attr::TITLE, self.slice(title.inner));
        if star {
            node = node.with_attr(attr::STAR, "*");
        }
        if let Some(s) = short {
            node = node.with_attr(attr::SHORT, self.slice(s.inner));
        }
        Some(node)
    }

    fn parse_dollar_math(&mut self) -> Result<StexNode, ParseError> {
        let start = self.pos;
        let display = self.bytes.get(start + 1) == Some(&b'$');
        let delim = if display { "$$" } else { "$" };
        let content_start = start + delim.len();
        let mut i = content_start;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 2,
                b'$' => {
                    if !display {
                        self.pos = i + 1;
                        return Ok(math_node(
                            delim,
                            &self.src[content_start..i],
                            Span::new(start, i + 1),
                        ));
                    }
                    if self.bytes.get(i + 1) == Some(&b'$') {
                        self.pos = i + 2;
                        return Ok(math_node(
                            delim,
                            &self.src[content_start..i],
                            Span::new(start, i + 2),
                        ));
                    }
                    i += 1;
                }
                _ => i += 1,
            }
        }
        self.pos = self.bytes.len();
        Err(ParseError::UnclosedMath {
            delim: delim.to_owned(),
            span: Span::new(start, content_start),
        })
    }

    fn parse_delimited_math(
        &mut self,
        start: usize,
        open: &str,
        close: &str,
    ) -> Result<StexNode, ParseError> {
        let content_start = start + open.len();
        let close_byte = close.as_bytes()[1];
        let mut i = content_start;
        while i < self.bytes.len() {
            if self.bytes[i] == b'\\' {
                if self.bytes.get(i + 1) == Some(&close_byte) {
                    self.pos = i + 2;
                    return Ok(math_node(
                        open,
                        &self.src[content_start..i],
                        Span::new(start, i + 2),
                    ));
                }
                i += 2;
            } else {
                i += 1;
            }
        }
        self.pos = self.bytes.len();
        Err(ParseError::UnclosedMath {
            delim: open.to_owned(),
            span: Span::new(start, content_start),
        })
    }

    fn brace_arg(&self, from: usize, allow_ws: bool) -> Option<Arg> {
        let at = if allow_ws {
            skip_ws(self.bytes, from)
        } else {
            from
        };
        if self.bytes.get(at) != Some(&b'{') {
            return None;
        }
        let mut depth = 0usize;
        let mut i = at;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 1,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(Arg {
                            inner: Span::new(at + 1, i),
                            end: i + 1,
                        });
                    }
                }
                _ => {}
            }
            i += 1;
        }
        None
    }

    fn bracket_arg(&self, from: usize, allow_ws: bool) -> Option<Arg> {
        let at = if allow_ws {
            skip_ws(self.bytes, from)
        } else {
            from
        };
        if self.bytes.get(at) != Some(&b'[') {
            return None;
        }
        let mut depth = 0usize;
        let mut i = at + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 1,
                b'{' => depth += 1,
                b'}' => depth = depth.checked_sub(1)?,
                b']' if depth == 0 => {
                    return Some(Arg {
                        inner: Span::new(at + 1, i),
                        end: i + 1,
                    })
                }
                _ => {}
            }
            i += 1;
        }
        None
    }
}

enum Control {
    Node(StexNode),
    Closed,
}

fn is_eof_error(e: &ParseError) -> bool {
    matches!(
        e,
        ParseError::UnbalancedBraces { .. }
            | ParseError::UnclosedEnvironment { .. }
            | ParseError::UnclosedMath { .. }
    )
}

fn math_node(delim: &str, content: &str, span: Span) -> StexNode {
    StexNode::new(NodeKind::Math, span)
        .with_attr(attr::DELIM, delim)
        .with_attr(attr::CONTENT, content)
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

pub(crate) fn is_recognized_macro(name: &str) -> bool {
    matches!(
        name,
        "usemodule"
            | "importmodule"
            | "symdecl"
            | "symdef"
            | "symref"
            | "sr"
            | "sn"
            | "mcc"
            | "scc"
            | "fillinsol"
            | "objective"
            | "precondition"
            | "chapter"
            | "section"
            | "subsection"
    )
}

/// Splits a `key=value, flag, key={braced, value}` list at top-level commas.
/// Braced values are unwrapped; keys are trimmed.
pub fn split_options(raw: &str) -> Vec<(Option<String>, String)> {
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i <= bytes.len() {
        let at_end = i == bytes.len();
        if !at_end {
            match bytes[i] {
                b'\\' => {
                    i += 2;
                    continue;
                }
                b'{' => depth += 1,
                b'}' => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        if at_end || (bytes[i] == b',' && depth == 0) {
            let item = &raw[start..i.min(raw.len())];
            if !item.trim().is_empty() {
                items.push(split_item(item));
            }
            start = i + 1;
        }
        i += 1;
    }
    items
}

fn split_item(item: &str) -> (Option<String>, String) {
    let mut depth = 0usize;
    let mut escaped = false;
    for (i, b) in item.bytes().enumerate() {
        if escaped {
            escaped = false;
            continue;
        }
        match b {
            b'\\' => escaped = true,
            b'{' => depth += 1,
            b'}' => depth = depth.saturating_sub(1),
            b'=' if depth == 0 => {
                let key = item[..i].trim().to_owned();
                let value = item[i + 1..].trim();
                return (Some(key), unbrace(value).to_owned());
            }
            _ => {}
        }
    }
    (None, item.trim().to_owned())
}

fn unbrace(value: &str) -> &str {
    if value.len() >= 2 && value.starts_with('{') && value.ends_with('}') {
        // only strip when the outer braces match each other
        let inner = &value[1..value.len() - 1];
        let mut depth = 0i64;
        let mut escaped = false;
        for b in inner.bytes() {
            if escaped {
                escaped = false;
                continue;
            }
            match b {
                b'\\' => escaped = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth < 0 {
                        return value;
                    }
                }
                _ => {}
            }
        }
        if depth == 0 && !escaped {
            return inner;
        }
    }
    value
}
