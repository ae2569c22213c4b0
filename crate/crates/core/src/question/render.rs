//! Render model: HTML-safe views of a question for the review console.
//! The student view has no correctness or feedback fields at all.

use serde::{Deserialize, Serialize};

use super::{QuestionScope, QuestionType, QuizQuestion, ReviewStatus};
use crate::graph::KnowledgeGraph;
use crate::stex::{attr, parse_snippet, NodeKind, StexNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderVariant {
    Student,
    Instructor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentOption {
    pub index: usize,
    pub html: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentView {
    pub variant: RenderVariant,
    pub id: String,
    pub qtype: QuestionType,
    pub stem_html: String,
    pub options: Vec<StudentOption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructorOption {
    pub index: usize,
    pub html: String,
    pub correct: bool,
    pub feedback_html: Option<String>,
    pub grading_action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveView {
    pub dimension: String,
    pub symbol_name: String,
    pub symbol: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructorView {
    pub variant: RenderVariant,
    pub id: String,
    pub qtype: QuestionType,
    pub stem_html: String,
    pub options: Vec<InstructorOption>,
    pub fib_solution: Option<String>,
    pub objectives: Vec<ObjectiveView>,
    pub preconditions: Vec<ObjectiveView>,
    pub used_modules: Vec<String>,
    pub review_status: ReviewStatus,
    pub source: String,
}

/// Without a graph, symbol references carry only their name.
pub fn student_view(q: &QuizQuestion, graph: Option<&KnowledgeGraph>) -> StudentView {
    let r = Renderer::new(q, graph, RenderVariant::Student);
    StudentView {
        variant: RenderVariant::Student,
        id: q.id.clone(),
        qtype: q.qtype,
        stem_html: r.html(&q.stem),
        options: q
            .options
            .iter()
            .enumerate()
            .map(|(index, o)| StudentOption {
                index,
                html: r.html(&o.text),
            })
            .collect(),
    }
}

pub fn instructor_view(q: &QuizQuestion, graph: Option<&KnowledgeGraph>) -> InstructorView {
    let r = Renderer::new(q, graph, RenderVariant::Instructor);
    let pairs = |list: &[super::ObjectivePair]| {
        list.iter()
            .map(|p| ObjectiveView {
                dimension: p.dimension.clone(),
                symbol_name: p.symbol.clone(),
                symbol: r.uri(&p.symbol),
            })
            .collect()
    };
    InstructorView {
        variant: RenderVariant::Instructor,
        id: q.id.clone(),
        qtype: q.qtype,
        stem_html: r.html(&q.stem),
        options: q
            .options
            .iter()
            .enumerate()
            .map(|(index, o)| InstructorOption {
                index,
                html: r.html(&o.text),
                correct: o.correct,
                feedback_html: o.feedback.as_deref().map(|f| match parse_snippet(f, 0) {
                    Ok(nodes) => r.html(&nodes),
                    Err(_) => escape(f),
                }),
                grading_action: o
                    .grading_action
                    .map(|a| format!("{:?} {}", a.kind, a.points).to_lowercase()),
            })
            .collect(),
        fib_solution: q.fib_solution.clone(),
        objectives: pairs(&q.objectives),
        preconditions: pairs(&q.preconditions),
        used_modules: q.used_modules.iter().map(ToString::to_string).collect(),
        review_status: q.review_status,
        source: q.source.clone(),
    }
}

struct Renderer<'a> {
    graph: Option<&'a KnowledgeGraph>,
    scope: Option<QuestionScope>,
    variant: RenderVariant,
}

impl<'a> Renderer<'a> {
    fn new(q: &QuizQuestion, graph: Option<&'a KnowledgeGraph>, variant: RenderVariant) -> Self {
        Renderer {
            graph,
            scope: graph.map(|g| QuestionScope::new(q, g)),
            variant,
        }
    }

    fn uri(&self, name: &str) -> Option<String> {
        let (graph, scope) = (self.graph?, self.scope.as_ref()?);
        scope.resolve(graph, name).ok().map(|s| s.0)
    }

    fn html(&self, nodes: &[StexNode]) -> String {
        let mut out = String::new();
        for node in nodes {
            self.push(node, &mut out);
        }
        out.trim().to_owned()
    }

    fn push(&self, node: &StexNode, out: &mut String) {
        let a = |key| node.attr(key).unwrap_or_default();
        match node.kind {
            NodeKind::Text => out.push_str(&escape(a(attr::TEXT))),
            NodeKind::SymbolRef => {
                let name = a(attr::NAME);
                let verbalization = node.attr(attr::VERBALIZATION).unwrap_or(name);
                out.push_str("<span class=\"symref\"");
                if let Some(uri) = self.uri(name) {
                    out.push_str(&format!(" data-symbol=\"{}\"", escape(&uri)));
                }
                out.push_str(&format!(
                    " data-symbol-name=\"{}\" data-verbalization=\"{}\">{}</span>",
                    escape(name),
                    escape(verbalization),
                    escape(verbalization)
                ));
            }
            NodeKind::Math => {
                let display = matches!(node.attr(attr::DELIM), Some("$$" | "\\["));
                out.push_str(&format!(
                    "<span class=\"math{}\">{}</span>",
                    if display { " display" } else { "" },
                    escape(a(attr::CONTENT))
                ));
            }
            NodeKind::FillInSol => match self.variant {
                RenderVariant::Student => out.push_str("<span class=\"blank\"></span>"),
                RenderVariant::Instructor => out.push_str(&format!(
                    "<span class=\"blank\" data-solution=\"{}\"></span>",
                    escape(a(attr::SOLUTION))
                )),
            },
            NodeKind::SectionMarker => out.push_str(&escape(a(attr::TITLE))),
            NodeKind::Environment if node.attr(attr::VERBATIM).is_some() => {
                out.push_str(&format!("<pre>{}</pre>", escape(a(attr::VERBATIM))));
            }
            NodeKind::Environment => {
                out.push_str(&format!(
                    "<div class=\"env\" data-env=\"{}\">",
                    escape(a(attr::NAME))
                ));
                self.children(node, out);
                out.push_str("</div>");
            }
            NodeKind::UseModule
            | NodeKind::SymbolDecl
            | NodeKind::SymbolDef
            | NodeKind::Objective
            | NodeKind::MultiChoiceBlock
            | NodeKind::SingleChoiceBlock
            | NodeKind::ChoiceOption => {}
            NodeKind::Group | NodeKind::Document | NodeKind::ModuleDecl | NodeKind::Problem => {
                self.children(node, out)
            }
        }
    }

    fn children(&self, node: &StexNode, out: &mut String) {
        for child in &node.children {
            self.push(child, out);
        }
    }
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}
