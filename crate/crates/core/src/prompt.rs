//! Master prompt template and its substitution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{build_context_for, ContextBundle, ContextError, DEFAULT_TOKEN_BUDGET};
use crate::graph::{Granularity, KnowledgeGraph, SymbolId};
use crate::question::{Dimension, QuestionType};

pub const DEFAULT_TEMPLATE: &str = include_str!("../templates/master_prompt.txt");
pub const DEFAULT_TEMPLATE_VERSION: &str = "1";
pub const MAX_QUESTIONS: usize = 5;

pub const PLACEHOLDERS: [&str; 8] = [
    "concepts",
    "course",
    "course_description",
    "cognitive_dimension",
    "difficulty",
    "n_questions",
    "allowed_types",
    "learning_objects",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!(
                "`{other}` is not a difficulty (easy, medium, hard)"
            )),
        }
    }
}

fn default_granularity() -> Granularity {
    Granularity::Section
}

fn default_budget() -> usize {
    DEFAULT_TOKEN_BUDGET
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub concepts: Vec<SymbolId>,
    pub course_name: String,
    pub course_description: String,
    pub cognitive_dimension: Dimension,
    pub difficulty: Difficulty,
    pub n_questions: usize,
    pub allowed_types: BTreeSet<QuestionType>,
    #[serde(default = "default_granularity")]
    pub granularity: Granularity,
    #[serde(default = "default_budget")]
    pub token_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error("at least one concept is required")]
    NoConcepts,
    #[error("between 1 and {MAX_QUESTIONS} questions can be requested, not {0}")]
    QuestionCount(usize),
    #[error("at least one question type must be allowed")]
    NoQuestionTypes,
    #[error("token budget must be positive")]
    ZeroBudget,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        if self.concepts.is_empty() {
            return Err(RequestError::NoConcepts);
        }
        if !(1..=MAX_QUESTIONS).contains(&self.n_questions) {
            return Err(RequestError::QuestionCount(self.n_questions));
        }
        if self.allowed_types.is_empty() {
            return Err(RequestError::NoQuestionTypes);
        }
        if self.token_budget == 0 {
            return Err(RequestError::ZeroBudget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Segment {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("`{{{{` at byte {0} is never closed")]
    Unclosed(usize),
    #[error("`{text}` at byte {offset} is not a placeholder name")]
    BadPlaceholder { offset: usize, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error(transparent)]
    InvalidRequest(#[from] RequestError),
    #[error("template uses unknown placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("no value for placeholder `{0}`")]
    MissingPlaceholderValue(String),
    #[error(transparent)]
    Context(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasterPromptTemplate {
    pub segments: Vec<Segment>,
    pub version: String,
}

impl Default for MasterPromptTemplate {
    fn default() -> Self {
        MasterPromptTemplate::parse(DEFAULT_TEMPLATE, DEFAULT_TEMPLATE_VERSION)
            .expect("built-in template parses")
    }
}

impl MasterPromptTemplate {
    /// `{{name}}` is a placeholder and `{{! ... }}` a comment, which may
    /// itself contain braces pairs. A comment that fills its lines is
    /// removed together with its line break.
    pub fn parse(text: &str, version: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut rest = 0;
        while let Some(found) = text[rest..].find("{{") {
            let open = rest + found;
            literal.push_str(&text[rest..open]);
            if text[open + 2..].starts_with('!') {
                let end = comment_end(text, open).ok_or(TemplateError::Unclosed(open))?;
                let line_start = literal.is_empty() || literal.ends_with('\n');
                rest = end;
                if line_start && text[end..].starts_with('\n') {
                    rest += 1;
                }
                continue;
            }
            let close = text[open..]
                .find("}}")
                .ok_or(TemplateError::Unclosed(open))?
                + open;
            let name = text[open + 2..close].trim();
            if name.is_empty() || !name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
                return Err(TemplateError::BadPlaceholder {
                    offset: open,
                    text: text[open..close + 2].to_owned(),
                });
            }
            if !literal.is_empty() {
                segments.push(Segment::Literal(std::mem::take(&mut literal)));
            }
            segments.push(Segment::Placeholder(name.to_owned()));
            rest = close + 2;
        }
        literal.push_str(&text[rest..]);
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(MasterPromptTemplate {
            segments,
            version: version.to_owned(),
        })
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(p) => Some(p.as_str()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    /// Single-pass substitution: values are inserted verbatim, never
    /// expanded again.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(name) => out.push_str(
                    values
                        .get(name.as_str())
                        .ok_or_else(|| PromptError::MissingPlaceholderValue(name.clone()))?,
                ),
            }
        }
        Ok(out)
    }
}

/// Byte offset just past the comment opened at `open`.
fn comment_end(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = open;
    while i + 1 < bytes.len() {
        match &bytes[i..i + 2] {
            b"{{" => {
                depth += 1;
                i += 2;
            }
            b"}}" => {
                depth -= 1;
                i += 2;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => i += 1,
        }
    }
    None
}

pub fn list_placeholders(template: &MasterPromptTemplate) -> BTreeSet<&str> {
    template.placeholders()
}

pub fn assemble_prompt(
    template: &MasterPromptTemplate,
    request: &GenerationRequest,
    context: &ContextBundle,
) -> Result<String, PromptError> {
    request.validate()?;
    if let Some(unknown) = template
        .placeholders()
        .into_iter()
        .find(|p| !PLACEHOLDERS.contains(p))
    {
        return Err(PromptError::UnknownPlaceholder(unknown.to_owned()));
    }
    let values = BTreeMap::from([
        (
            "concepts",
            request
                .concepts
                .iter()
                .map(SymbolId::name)
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("course", request.course_name.clone()),
        ("course_description", request.course_description.clone()),
        (
            "cognitive_dimension",
            request.cognitive_dimension.prompt_keyword().to_owned(),
        ),
        ("difficulty", request.difficulty.to_string()),
        ("n_questions", request.n_questions.to_string()),
        (
            "allowed_types",
            request
                .allowed_types
                .iter()
                .map(|t| t.label())
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("learning_objects", context.render().trim_end().to_owned()),
    ]);
    template.render(&values)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub request: GenerationRequest,
    pub template_version: String,
    pub context: ContextBundle,
    pub prompt: String,
}

/// Context retrieval followed by assembly.
pub fn build_prompt(
    graph: &KnowledgeGraph,
    template: &MasterPromptTemplate,
    request: &GenerationRequest,
) -> Result<PromptBundle, PromptError> {
    request.validate()?;
    let context = build_context_for(
        graph,
        &request.concepts,
        request.granularity,
        request.token_budget,
    )?;
    let prompt = assemble_prompt(template, request, &context)?;
    Ok(PromptBundle {
        request: request.clone(),
        template_version: template.version.clone(),
        context,
        prompt,
    })
}
