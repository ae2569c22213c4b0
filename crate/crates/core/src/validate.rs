//! Machine-checkable quality checks for generated questions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::graph::{DanglingReason, KnowledgeGraph, ModuleId, ResolveError};
use crate::prompt::GenerationRequest;
use crate::question::{
    body_references, from_document, QuestionScope, QuestionType, QuizQuestion, Reject, RejectReason,
};
use crate::stex::{attr, parse_snippet, plain_text, NodeKind, SourceDocument, Span, StexNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Structural,
    Relational,
    Feedback,
    Leakage,
    Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

macro_rules! issue_codes {
    ($($variant:ident => $name:literal, $cat:ident, $sev:ident;)*) => {
        /// The closed set of issue codes.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum IssueCode {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl IssueCode {
            pub const ALL: &'static [IssueCode] = &[$(IssueCode::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self { $(IssueCode::$variant => $name,)* }
            }

            pub fn category(self) -> Category {
                match self { $(IssueCode::$variant => Category::$cat,)* }
            }

            pub fn severity(self) -> Severity {
                match self { $(IssueCode::$variant => Severity::$sev,)* }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($name => Some(IssueCode::$variant),)* _ => None }
            }
        }
    };
}

issue_codes! {
    MissingObjective => "MISSING_OBJECTIVE", Structural, Error;
    InvalidDimension => "INVALID_DIMENSION", Structural, Error;
    ScMultipleTrue => "SC_MULTIPLE_TRUE", Structural, Error;
    ScNoTrue => "SC_NO_TRUE", Structural, Error;
    McNoTrue => "MC_NO_TRUE", Structural, Error;
    FibNotPlaintext => "FIB_NOT_PLAINTEXT", Structural, Error;
    InvalidGradingAction => "INVALID_GRADING_ACTION", Structural, Error;
    WrongType => "WRONG_TYPE", Format, Error;
    ParseError => "PARSE_ERROR", Format, Error;
    NoAnswerBlock => "NO_ANSWER_BLOCK", Format, Error;
    MultipleAnswerBlocks => "MULTIPLE_ANSWER_BLOCKS", Format, Error;
    HallucinatedSymbol => "HALLUCINATED_SYMBOL", Relational, Error;
    DanglingUsemodule => "DANGLING_USEMODULE", Relational, Error;
    AmbiguousSymbol => "AMBIGUOUS_SYMBOL", Relational, Warning;
    UnannotatedTerm => "UNANNOTATED_TERM", Relational, Warning;
    MissingUsemodule => "MISSING_USEMODULE", Relational, Warning;
    MissingFeedback => "MISSING_FEEDBACK", Feedback, Warning;
    UninformativeFeedback => "UNINFORMATIVE_FEEDBACK", Feedback, Warning;
    AnswerLeak => "ANSWER_LEAK", Leakage, Error;
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub category: Category,
    pub code: IssueCode,
    pub severity: Severity,
    pub span: Option<Span>,
    pub message: String,
}

impl ValidationIssue {
    pub fn new(code: IssueCode, span: Option<Span>, message: impl Into<String>) -> Self {
        ValidationIssue {
            category: code.category(),
            code,
            severity: code.severity(),
            span,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    PassWithWarnings,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub question_id: String,
    pub issues: Vec<ValidationIssue>,
    pub verdict: Verdict,
}

impl ValidationReport {
    /// Sorts the issues (question-level first, then by span start, then
    /// code) and derives the verdict.
    pub fn new(question_id: impl Into<String>, mut issues: Vec<ValidationIssue>) -> Self {
        issues.sort_by(|a, b| {
            a.span
                .map(|s| s.start)
                .cmp(&b.span.map(|s| s.start))
                .then(a.code.as_str().cmp(b.code.as_str()))
        });
        let verdict = if issues.iter().any(|i| i.severity == Severity::Error) {
            Verdict::Fail
        } else if issues.is_empty() {
            Verdict::Pass
        } else {
            Verdict::PassWithWarnings
        };
        ValidationReport {
            question_id: question_id.into(),
            issues,
            verdict,
        }
    }

    pub fn codes(&self) -> BTreeSet<IssueCode> {
        self.issues.iter().map(|i| i.code).collect()
    }
}

/// Tunables for the feedback and leakage heuristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorConfig {
    pub jaccard_threshold: f64,
    /// Dropped from the start of both texts before comparing.
    pub negation_tokens: Vec<String>,
    pub negation_phrases: Vec<String>,
    pub leak_markers: Vec<String>,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        ValidatorConfig {
            jaccard_threshold: 0.5,
            negation_tokens: owned(&["no", "not", "incorrect"]),
            negation_phrases: owned(&["it is not the case that", "it is not true that"]),
            leak_markers: owned(&[
                "correct answer",
                "this is correct",
                "(correct)",
                "(true)",
                "(false)",
            ]),
        }
    }
}

pub fn validate(
    q: &QuizQuestion,
    graph: &KnowledgeGraph,
    request: Option<&GenerationRequest>,
) -> ValidationReport {
    validate_with(q, graph, request, &ValidatorConfig::default())
}

pub fn validate_with(
    q: &QuizQuestion,
    graph: &KnowledgeGraph,
    request: Option<&GenerationRequest>,
    config: &ValidatorConfig,
) -> ValidationReport {
    let mut issues = validate_structural(q, request);
    issues.extend(validate_relational(q, graph));
    issues.extend(check_feedback_with(q, config));
    issues.extend(check_leakage_with(q, config));
    ValidationReport::new(q.id.clone(), issues)
}

/// Validates many questions; reports come back in input order.
pub fn validate_batch(
    questions: &[QuizQuestion],
    graph: &KnowledgeGraph,
    request: Option<&GenerationRequest>,
    exec: Execution,
) -> Vec<ValidationReport> {
    let config = ValidatorConfig::default();
    exec.map(questions, |q| validate_with(q, graph, request, &config))
}

/// Report for a problem that did not yield a valid question. Invariant
/// violations validate the typed candidate; anything else fails outright.
pub fn validate_reject(
    reject: &Reject,
    graph: &KnowledgeGraph,
    request: Option<&GenerationRequest>,
) -> ValidationReport {
    if let Some(candidate) = &reject.candidate {
        return validate(candidate, graph, request);
    }
    let (code, message) = match &reject.reason {
        RejectReason::NoAnswerBlock => (
            IssueCode::NoAnswerBlock,
            "no choice block or \\fillinsol".to_owned(),
        ),
        RejectReason::MultipleAnswerBlocks => (
            IssueCode::MultipleAnswerBlocks,
            "more than one answer block in one problem".to_owned(),
        ),
        RejectReason::InvalidGradingAction(detail) => (
            IssueCode::InvalidGradingAction,
            format!("invalid grading action: {detail}"),
        ),
        other => unreachable!("{other:?} always carries a candidate"),
    };
    ValidationReport::new(
        reject.id.clone(),
        vec![ValidationIssue::new(code, Some(reject.span), message)],
    )
}

/// Parses a whole document and reports on every problem in it.
pub fn validate_document(
    doc: &SourceDocument,
    graph: &KnowledgeGraph,
    request: Option<&GenerationRequest>,
) -> Vec<ValidationReport> {
    let extracted = match from_document(doc) {
        Ok(e) => e,
        Err(e) => {
            return vec![ValidationReport::new(
                doc.doc_id.clone(),
                vec![ValidationIssue::new(
                    IssueCode::ParseError,
                    Some(e.span()),
                    e.to_string(),
                )],
            )]
        }
    };
    let mut reports: Vec<(Span, ValidationReport)> = extracted
        .questions
        .iter()
        .map(|q| (question_span(q), validate(q, graph, request)))
        .chain(
            extracted
                .rejects
                .iter()
                .map(|r| (r.span, validate_reject(r, graph, request))),
        )
        .collect();
    reports.sort_by_key(|(span, _)| span.start);
    if reports.is_empty() {
        return vec![ValidationReport::new(
            doc.doc_id.clone(),
            vec![ValidationIssue::new(
                IssueCode::NoAnswerBlock,
                None,
                "no sproblem environment",
            )],
        )];
    }
    reports.into_iter().map(|(_, r)| r).collect()
}

fn question_span(q: &QuizQuestion) -> Span {
    q.stem
        .first()
        .map(|n| n.span)
        .or_else(|| q.options.first().map(|o| o.span))
        .unwrap_or_default()
}

pub fn validate_structural(
    q: &QuizQuestion,
    request: Option<&GenerationRequest>,
) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if q.objectives.is_empty() {
        issues.push(ValidationIssue::new(
            IssueCode::MissingObjective,
            None,
            "no \\objective given",
        ));
    }
    for pair in q.objectives.iter().chain(&q.preconditions) {
        if pair.parsed_dimension().is_none() {
            issues.push(ValidationIssue::new(
                IssueCode::InvalidDimension,
                Some(pair.span),
                format!("`{}` is not a cognitive dimension", pair.dimension),
            ));
        }
    }
    let trues: Vec<_> = q.options.iter().filter(|o| o.correct).collect();
    match q.qtype {
        QuestionType::SingleChoice if trues.len() > 1 => issues.push(ValidationIssue::new(
            IssueCode::ScMultipleTrue,
            Some(trues[1].span),
            format!("single choice question with {} true options", trues.len()),
        )),
        QuestionType::SingleChoice if trues.is_empty() => issues.push(ValidationIssue::new(
            IssueCode::ScNoTrue,
            None,
            "single choice question without a true option",
        )),
        QuestionType::MultipleChoice if trues.is_empty() => issues.push(ValidationIssue::new(
            IssueCode::McNoTrue,
            None,
            "multiple choice question without a true option",
        )),
        QuestionType::FillInTheBlanks => {
            if let Some(sol) = q
                .fib_solution
                .as_deref()
                .filter(|s| s.contains(['\\', '{', '}']))
            {
                issues.push(ValidationIssue::new(
                    IssueCode::FibNotPlaintext,
                    q.fib_span,
                    format!("solution `{sol}` is not plain text"),
                ));
            }
        }
        _ => {}
    }
    if let Some(req) = request {
        if !req.allowed_types.contains(&q.qtype) {
            issues.push(ValidationIssue::new(
                IssueCode::WrongType,
                None,
                format!("{} questions were not requested", q.qtype.label()),
            ));
        }
    }
    issues
}

pub fn validate_relational(q: &QuizQuestion, graph: &KnowledgeGraph) -> Vec<ValidationIssue> {
    let scope = QuestionScope::new(q, graph);
    let mut issues = Vec::new();
    for (import, span, reason) in &scope.dangling {
        let message = match reason {
            DanglingReason::Missing => format!("\\usemodule{import} names no module in the corpus"),
            DanglingReason::Ambiguous { candidates } => format!(
                "\\usemodule{import} is ambiguous: {}",
                candidates
                    .iter()
                    .map(ModuleId::as_str)
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        };
        issues.push(ValidationIssue::new(
            IssueCode::DanglingUsemodule,
            Some(*span),
            message,
        ));
    }

    let mut names: Vec<(String, Span)> = q
        .objectives
        .iter()
        .chain(&q.preconditions)
        .map(|p| (p.symbol.clone(), p.span))
        .collect();
    names.extend(
        body_references(q).map(|n| (n.attr(attr::NAME).unwrap_or_default().to_owned(), n.span)),
    );
    for option in &q.options {
        for node in option.feedback.iter().flat_map(|f| feedback_nodes(f)) {
            if node.kind == NodeKind::SymbolRef {
                names.push((
                    node.attr(attr::NAME).unwrap_or_default().to_owned(),
                    option.span,
                ));
            }
        }
    }

    let mut unimported = BTreeSet::new();
    for (name, span) in &names {
        match scope.resolve(graph, name) {
            Ok(symbol) => {
                if scope.modules.is_empty() {
                    unimported.insert(symbol.module());
                }
            }
            Err(ResolveError::Ambiguous { candidates, .. }) => issues.push(ValidationIssue::new(
                IssueCode::AmbiguousSymbol,
                Some(*span),
                format!(
                    "`{name}` could be any of {}",
                    candidates
                        .iter()
                        .map(|c| c.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            )),
            Err(_) => {
                let elsewhere = graph.symbols_named(name);
                let message = if elsewhere.is_empty() {
                    format!("no symbol `{name}` exists in the corpus")
                } else {
                    format!(
                        "`{name}` is not visible from the imported modules (declared in {})",
                        elsewhere
                            .iter()
                            .map(|s| s.module().0)
                            .collect::<Vec<_>>()
                            .join(", ")
                    )
                };
                issues.push(ValidationIssue::new(
                    IssueCode::HallucinatedSymbol,
                    Some(*span),
                    message,
                ));
            }
        }
    }
    for module in unimported {
        issues.push(ValidationIssue::new(
            IssueCode::MissingUsemodule,
            None,
            format!("symbols of {module} are used without importing it"),
        ));
    }
    issues.extend(unannotated_terms(q, graph, &scope));
    issues
}

/// Symbol names (hyphens read as spaces too) occurring as whole words in
/// the stem's plain text, for symbols the stem never references.
fn unannotated_terms(
    q: &QuizQuestion,
    graph: &KnowledgeGraph,
    scope: &QuestionScope,
) -> Vec<ValidationIssue> {
    let referenced: BTreeSet<&str> = q
        .stem
        .iter()
        .flat_map(StexNode::descendants)
        .filter(|n| n.kind == NodeKind::SymbolRef)
        .filter_map(|n| n.attr(attr::NAME))
        .collect();
    let visible = if scope.modules.is_empty() {
        graph.modules.keys().cloned().collect()
    } else {
        graph.visible_modules(&scope.modules)
    };
    let mut texts = Vec::new();
    for node in q.stem.iter().flat_map(StexNode::descendants) {
        if node.kind == NodeKind::Text {
            texts.push((node.attr(attr::TEXT).unwrap_or_default(), node.span));
        }
    }
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    for module in &visible {
        let Some(entry) = graph.modules.get(module) else {
            continue;
        };
        for symbol in &entry.symbols {
            let name = symbol.name();
            if referenced.contains(name) || !seen.insert(name.to_owned()) {
                continue;
            }
            let spaced = name.replace('-', " ");
            let hit = texts.iter().find_map(|(text, span)| {
                find_word(text, name)
                    .or_else(|| find_word(text, &spaced))
                    .map(|at| Span::new(span.start + at, span.start + at + name.len()))
            });
            if let Some(span) = hit {
                issues.push(ValidationIssue::new(
                    IssueCode::UnannotatedTerm,
                    Some(span),
                    format!("`{spaced}` appears without a reference to {symbol}"),
                ));
            }
        }
    }
    issues
}

/// Byte offset of the first case-insensitive whole-word match.
fn find_word(text: &str, word: &str) -> Option<usize> {
    if word.is_empty() {
        return None;
    }
    let hay = text.to_ascii_lowercase();
    let needle = word.to_ascii_lowercase();
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '-' || c == '_');
    let mut from = 0;
    while let Some(found) = hay[from..].find(&needle) {
        let at = from + found;
        let end = at + needle.len();
        if !is_word(hay[..at].chars().next_back()) && !is_word(hay[end..].chars().next()) {
            return Some(at);
        }
        from = at + needle.chars().next().map_or(1, char::len_utf8);
    }
    None
}

fn feedback_nodes(feedback: &str) -> Vec<StexNode> {
    parse_snippet(feedback, 0).unwrap_or_else(|_| vec![StexNode::text(feedback, Span::default())])
}

fn feedback_plain(feedback: &str) -> String {
    plain_text(&feedback_nodes(feedback))
}

pub fn check_feedback(q: &QuizQuestion) -> Vec<ValidationIssue> {
    check_feedback_with(q, &ValidatorConfig::default())
}

pub fn check_feedback_with(q: &QuizQuestion, config: &ValidatorConfig) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for (i, option) in q.options.iter().enumerate() {
        match &option.feedback {
            None if !option.correct => issues.push(ValidationIssue::new(
                IssueCode::MissingFeedback,
                Some(option.span),
                format!("option {} is wrong but has no feedback", i + 1),
            )),
            None => {}
            Some(feedback) => {
                let similarity =
                    feedback_similarity(&option.plain(), &feedback_plain(feedback), config);
                if similarity >= config.jaccard_threshold {
                    issues.push(ValidationIssue::new(
                        IssueCode::UninformativeFeedback,
                        Some(option.span),
                        format!(
                            "feedback of option {} mostly repeats the option (similarity {similarity:.2})",
                            i + 1
                        ),
                    ));
                }
            }
        }
    }
    issues
}

/// Jaccard similarity of the normalized token sets; 0 when both are empty.
pub fn feedback_similarity(option: &str, feedback: &str, config: &ValidatorConfig) -> f64 {
    let a: BTreeSet<String> = normalize(option, config).into_iter().collect();
    let b: BTreeSet<String> = normalize(feedback, config).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Lowercased alphanumeric tokens with leading negations removed.
pub fn normalize(text: &str, config: &ValidatorConfig) -> Vec<String> {
    let split = |s: &str| -> Vec<String> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect()
    };
    let mut tokens = split(text);
    let phrases: Vec<Vec<String>> = config.negation_phrases.iter().map(|p| split(p)).collect();
    loop {
        if tokens
            .first()
            .is_some_and(|t| config.negation_tokens.contains(t))
        {
            tokens.remove(0);
        } else if let Some(p) = phrases
            .iter()
            .find(|p| !p.is_empty() && tokens.starts_with(p))
        {
            tokens.drain(..p.len());
        } else {
            return tokens;
        }
    }
}

pub fn check_leakage(q: &QuizQuestion) -> Vec<ValidationIssue> {
    check_leakage_with(q, &ValidatorConfig::default())
}

pub fn check_leakage_with(q: &QuizQuestion, config: &ValidatorConfig) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for (i, option) in q.options.iter().enumerate() {
        let visible = option.plain();
        let lowered = visible.to_lowercase();
        if let Some(marker) = config
            .leak_markers
            .iter()
            .find(|m| lowered.contains(&m.to_lowercase()))
        {
            issues.push(ValidationIssue::new(
                IssueCode::AnswerLeak,
                Some(option.span),
                format!("option {} contains `{marker}`", i + 1),
            ));
            continue;
        }
        if let Some(feedback) = &option.feedback {
            let plain = feedback_plain(feedback);
            let plain = plain.trim();
            if !plain.is_empty()
                && (visible.contains(plain) || option.source().contains(feedback.as_str()))
            {
                issues.push(ValidationIssue::new(
                    IssueCode::AnswerLeak,
                    Some(option.span),
                    format!("option {} contains its own feedback", i + 1),
                ));
            }
        }
    }
    issues
}
