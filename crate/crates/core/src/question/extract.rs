use serde::{Deserialize, Serialize};

use super::{
    AnswerOption, GradingAction, GradingKind, ObjectivePair, QuestionType, QuizQuestion,
    ReviewStatus,
};
use crate::graph::import_ref;
use crate::stex::{
    attr, parse_document, serialize, DocumentAst, NodeKind, ParseError, SourceDocument, Span,
    StexNode,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail")]
pub enum RejectReason {
    NoAnswerBlock,
    MultipleAnswerBlocks,
    SingleChoiceMultipleTrue,
    SingleChoiceNoTrue,
    MultipleChoiceNoTrue,
    FillInNotPlainText,
    InvalidGradingAction(String),
}

impl RejectReason {
    /// Whether the problem still yields a typed question that violates an
    /// invariant (as opposed to not being a question at all).
    pub fn has_candidate(&self) -> bool {
        matches!(
            self,
            RejectReason::SingleChoiceMultipleTrue
                | RejectReason::SingleChoiceNoTrue
                | RejectReason::MultipleChoiceNoTrue
                | RejectReason::FillInNotPlainText
        )
    }
}

/// A problem that is not a valid question. `candidate` carries the typed
/// question when only an invariant failed, so it can still be reviewed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub id: String,
    pub reason: RejectReason,
    pub span: Span,
    pub source: String,
    pub candidate: Option<QuizQuestion>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub questions: Vec<QuizQuestion>,
    pub rejects: Vec<Reject>,
}

/// One question per `sproblem`; sources are canonical serializations.
pub fn from_ast(ast: &DocumentAst) -> Extracted {
    extract(ast, None)
}

/// Like [`from_ast`] but keeps the original source text of each problem.
pub fn from_document(doc: &SourceDocument) -> Result<Extracted, ParseError> {
    let ast = parse_document(doc)?;
    Ok(extract(&ast, Some(&doc.text)))
}

fn extract(ast: &DocumentAst, text: Option<&str>) -> Extracted {
    let mut problems = Vec::new();
    collect_problems(&ast.root, &mut Vec::new(), &mut problems);
    let mut out = Extracted::default();
    for (i, (problem, module)) in problems.into_iter().enumerate() {
        let id = format!("{}#p{}", ast.doc_id, i + 1);
        let source = match text {
            Some(t) => t[problem.span.start..problem.span.end].to_owned(),
            None => serialize(problem),
        };
        let enclosing = module.map(|path| format!("{}?{path}", ast.doc_id));
        match build_question(problem, id.clone(), source.clone(), enclosing) {
            Ok(q) => out.questions.push(q),
            Err((reason, candidate)) => out.rejects.push(Reject {
                id,
                reason,
                span: problem.span,
                source,
                candidate: candidate.map(|q| *q),
            }),
        }
    }
    out
}

fn collect_problems<'a>(
    node: &'a StexNode,
    modules: &mut Vec<String>,
    out: &mut Vec<(&'a StexNode, Option<String>)>,
) {
    for child in &node.children {
        match child.kind {
            NodeKind::Problem => {
                out.push((child, (!modules.is_empty()).then(|| modules.join("/"))))
            }
            NodeKind::ModuleDecl => {
                modules.push(child.attr(attr::NAME).unwrap_or_default().trim().to_owned());
                collect_problems(child, modules, out);
                modules.pop();
            }
            _ => collect_problems(child, modules, out),
        }
    }
}

type Failure = (RejectReason, Option<Box<QuizQuestion>>);

fn build_question(
    problem: &StexNode,
    id: String,
    source: String,
    enclosing_module: Option<String>,
) -> Result<QuizQuestion, Failure> {
    let mut stem = Vec::new();
    let mut objectives = Vec::new();
    let mut preconditions = Vec::new();
    let mut used_modules = Vec::new();
    let mut used_module_spans = Vec::new();
    let mut blocks = Vec::new();
    let mut fillins = Vec::new();

    for node in &problem.children {
        match node.kind {
            NodeKind::UseModule => {
                used_modules.push(import_ref(node));
                used_module_spans.push(node.span);
            }
            NodeKind::Objective => {
                let pair = ObjectivePair {
                    dimension: node.attr(attr::DIMENSION).unwrap_or_default().to_owned(),
                    symbol: node.attr(attr::SYMBOL).unwrap_or_default().to_owned(),
                    span: node.span,
                };
                if node.attr(attr::MACRO) == Some("precondition") {
                    preconditions.push(pair);
                } else {
                    objectives.push(pair);
                }
            }
            NodeKind::MultiChoiceBlock | NodeKind::SingleChoiceBlock => blocks.push(node),
            _ => {
                fillins.extend(node.descendants().filter(|n| n.kind == NodeKind::FillInSol));
                stem.push(node.clone());
            }
        }
    }
    trim_nodes(&mut stem);

    let qtype = match (blocks.len(), fillins.len()) {
        (0, 0) => return Err((RejectReason::NoAnswerBlock, None)),
        (1, 0) if blocks[0].kind == NodeKind::MultiChoiceBlock => QuestionType::MultipleChoice,
        (1, 0) => QuestionType::SingleChoice,
        (0, 1) => QuestionType::FillInTheBlanks,
        _ => return Err((RejectReason::MultipleAnswerBlocks, None)),
    };

    let mut options = Vec::new();
    if let Some(block) = blocks.first() {
        for node in block
            .children
            .iter()
            .filter(|n| n.kind == NodeKind::ChoiceOption)
        {
            options.push(option_from(node).map_err(|r| (r, None))?);
        }
    }
    let fib_solution = fillins
        .first()
        .map(|n| n.attr(attr::SOLUTION).unwrap_or_default().trim().to_owned());

    let question = QuizQuestion {
        id,
        qtype,
        stem,
        options,
        fib_solution,
        fib_span: fillins.first().map(|n| n.span),
        objectives,
        preconditions,
        used_modules,
        used_module_spans,
        enclosing_module,
        source,
        review_status: ReviewStatus::Draft,
    };
    let correct = question.options.iter().filter(|o| o.correct).count();
    let violation = match qtype {
        QuestionType::SingleChoice if correct > 1 => Some(RejectReason::SingleChoiceMultipleTrue),
        QuestionType::SingleChoice if correct == 0 => Some(RejectReason::SingleChoiceNoTrue),
        QuestionType::MultipleChoice if correct == 0 => Some(RejectReason::MultipleChoiceNoTrue),
        QuestionType::FillInTheBlanks
            if question
                .fib_solution
                .as_deref()
                .is_some_and(|s| s.contains(['\\', '{', '}'])) =>
        {
            Some(RejectReason::FillInNotPlainText)
        }
        _ => None,
    };
    match violation {
        Some(reason) => Err((reason, Some(Box::new(question)))),
        None => Ok(question),
    }
}

fn option_from(node: &StexNode) -> Result<AnswerOption, RejectReason> {
    let mut actions = Vec::new();
    for (key, kind) in [
        (attr::SET, GradingKind::Set),
        (attr::ADD, GradingKind::Add),
        (attr::DEDUCT, GradingKind::Deduct),
    ] {
        if let Some(raw) = node.attr(key) {
            let points: f64 = raw
                .trim()
                .parse()
                .map_err(|_| RejectReason::InvalidGradingAction(format!("{key}={raw}")))?;
            if !points.is_finite() || points < 0.0 {
                return Err(RejectReason::InvalidGradingAction(format!("{key}={raw}")));
            }
            actions.push(GradingAction { kind, points });
        }
    }
    if actions.len() > 1 {
        return Err(RejectReason::InvalidGradingAction(
            "more than one grading action on one option".to_owned(),
        ));
    }
    let mut text = node.children.clone();
    trim_nodes(&mut text);
    Ok(AnswerOption {
        text,
        correct: node.attr(attr::TRUTH) == Some("T"),
        feedback: node
            .attr(attr::FEEDBACK)
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(str::to_owned),
        grading_action: actions.pop(),
        span: node.span,
    })
}

/// Drops whitespace-only text at both ends.
fn trim_nodes(nodes: &mut Vec<StexNode>) {
    let blank = |n: &StexNode| {
        n.kind == NodeKind::Text && n.attr(attr::TEXT).unwrap_or_default().trim().is_empty()
    };
    while nodes.first().is_some_and(blank) {
        nodes.remove(0);
    }
    while nodes.last().is_some_and(blank) {
        nodes.pop();
    }
}
