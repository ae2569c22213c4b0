//! Typed quiz questions extracted from `sproblem` environments.

mod extract;
mod grade;
mod render;
mod scope;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ImportRef, SymbolId};
use crate::stex::{plain_text, serialize_nodes, Span, StexNode};

pub use extract::{from_ast, from_document, Extracted, Reject, RejectReason};
pub use grade::{
    grade, GradeError, GradeResult, StudentResponse, TriggerReason, TriggeredFeedback,
    DEFAULT_POINTS,
};
pub use render::{
    instructor_view, student_view, InstructorOption, InstructorView, ObjectiveView, RenderVariant,
    StudentOption, StudentView,
};
pub(crate) use scope::body_references;
pub use scope::{extract_prerequisites, Prerequisites, QuestionScope, UnresolvedSymbol};

/// Bloom's revised taxonomy levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Remember,
    Understand,
    Apply,
    #[serde(alias = "analyse")]
    Analyze,
    Evaluate,
    Create,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Remember,
        Dimension::Understand,
        Dimension::Apply,
        Dimension::Analyze,
        Dimension::Evaluate,
        Dimension::Create,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Remember => "remember",
            Dimension::Understand => "understand",
            Dimension::Apply => "apply",
            Dimension::Analyze => "analyze",
            Dimension::Evaluate => "evaluate",
            Dimension::Create => "create",
        }
    }

    /// The spelling used by the master prompt.
    pub fn prompt_keyword(self) -> &'static str {
        match self {
            Dimension::Analyze => "analyse",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a cognitive dimension")]
pub struct UnknownDimension(pub String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "remember" => Ok(Dimension::Remember),
            "understand" => Ok(Dimension::Understand),
            "apply" => Ok(Dimension::Apply),
            "analyze" | "analyse" => Ok(Dimension::Analyze),
            "evaluate" => Ok(Dimension::Evaluate),
            "create" => Ok(Dimension::Create),
            other => Err(UnknownDimension(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionType {
    MultipleChoice,
    SingleChoice,
    FillInTheBlanks,
}

impl QuestionType {
    pub fn label(self) -> &'static str {
        match self {
            QuestionType::MultipleChoice => "multiple choice",
            QuestionType::SingleChoice => "single choice",
            QuestionType::FillInTheBlanks => "fill-in-the-blanks",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ReviewStatus {
    #[default]
    Draft,
    Accepted,
    Rejected,
    Edited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradingKind {
    Set,
    Add,
    Deduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradingAction {
    pub kind: GradingKind,
    pub points: f64,
}

/// An `\objective` or `\precondition` pair as written. The dimension is
/// kept raw so invalid keywords can be reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub dimension: String,
    pub symbol: String,
    pub span: Span,
}

impl ObjectivePair {
    pub fn parsed_dimension(&self) -> Option<Dimension> {
        self.dimension.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub text: Vec<StexNode>,
    pub correct: bool,
    /// Raw sTeX of the `feedback=` value; never blank.
    pub feedback: Option<String>,
    pub grading_action: Option<GradingAction>,
    pub span: Span,
}

impl AnswerOption {
    pub fn source(&self) -> String {
        serialize_nodes(&self.text).trim().to_owned()
    }

    pub fn plain(&self) -> String {
        plain_text(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub id: String,
    pub qtype: QuestionType,
    pub stem: Vec<StexNode>,
    pub options: Vec<AnswerOption>,
    pub fib_solution: Option<String>,
    #[serde(default)]
    pub fib_span: Option<Span>,
    pub objectives: Vec<ObjectivePair>,
    pub preconditions: Vec<ObjectivePair>,
    pub used_modules: Vec<ImportRef>,
    /// Spans of the `\usemodule` commands, parallel to `used_modules`.
    pub used_module_spans: Vec<Span>,
    /// Module the problem sits in, for questions inside course material.
    pub enclosing_module: Option<String>,
    pub source: String,
    pub review_status: ReviewStatus,
}

impl QuizQuestion {
    /// Document the question was extracted from.
    pub fn doc_id(&self) -> &str {
        self.id.rsplit_once("#p").map_or(&self.id, |(d, _)| d)
    }

    pub fn stem_source(&self) -> String {
        serialize_nodes(&self.stem).trim().to_owned()
    }

    pub fn stem_plain(&self) -> String {
        plain_text(&self.stem)
    }

    pub fn correct_indices(&self) -> Vec<usize> {
        self.options
            .iter()
            .enumerate()
            .filter(|(_, o)| o.correct)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Resolved form of an objective pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResolvedPair {
    pub dimension: Dimension,
    pub symbol: SymbolId,
}

#[cfg(test)]
mod tests;
