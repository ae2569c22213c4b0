//! Expert survey instrument, response ingestion and aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::KnowledgeGraph;
use crate::prompt::GenerationRequest;
use crate::question::{instructor_view, InstructorView, QuestionType, QuizQuestion};

pub const STATEMENTS: [&str; 6] = [
    "The GQ has a good FIT in terms of teaching material.",
    "The GQ can be solved using the available teaching material.",
    "The task description of the GQ cannot be misinterpreted (is not ambiguous).",
    "The GQ is relevant for the achievement of the specified Learning Objective.",
    "The feedback provided for the answer options of the GQ is helpful.",
    "The structure of the task corresponds to the specified task format.",
];

/// Short keys for the statements, used as CSV row labels.
pub const STATEMENT_KEYS: [&str; 6] = [
    "fit",
    "solvable",
    "unambiguous",
    "relevant",
    "feedback",
    "structure",
];

pub const AGREEMENT_LABELS: [&str; 7] = [
    "Strongly Disagree",
    "Disagree",
    "Somewhat Disagree",
    "Neither Agree nor Disagree",
    "Somewhat Agree",
    "Agree",
    "Strongly Agree",
];

pub const DIFFICULTY_LABELS: [&str; 5] = [
    "Very Difficult",
    "Difficult",
    "Moderate",
    "Easy",
    "Very Easy",
];

/// A question counts as agreed on a statement when its median rating is
/// at least this.
pub const AGREEMENT_THRESHOLD: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertScale {
    pub min: u8,
    pub max: u8,
    pub labels: Vec<String>,
}

impl LikertScale {
    fn from_labels(labels: &[&str]) -> Self {
        LikertScale {
            min: 1,
            max: labels.len() as u8,
            labels: labels.iter().map(|l| l.to_string()).collect(),
        }
    }

    pub fn agreement() -> Self {
        Self::from_labels(&AGREEMENT_LABELS)
    }

    pub fn difficulty() -> Self {
        Self::from_labels(&DIFFICULTY_LABELS)
    }

    pub fn contains(&self, value: u8) -> bool {
        (self.min..=self.max).contains(&value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParameters {
    pub concepts: Vec<String>,
    pub course: String,
    pub course_description: String,
    pub cognitive_dimension: String,
    pub difficulty: String,
    pub n_questions: usize,
    pub allowed_types: Vec<QuestionType>,
}

impl From<&GenerationRequest> for GenerationParameters {
    fn from(r: &GenerationRequest) -> Self {
        GenerationParameters {
            concepts: r.concepts.iter().map(|c| c.0.clone()).collect(),
            course: r.course_name.clone(),
            course_description: r.course_description.clone(),
            cognitive_dimension: r.cognitive_dimension.to_string(),
            difficulty: r.difficulty.to_string(),
            n_questions: r.n_questions,
            allowed_types: r.allowed_types.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub parameters: Option<GenerationParameters>,
    pub question: InstructorView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyStatement {
    pub key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyInstrument {
    pub question_id: String,
    pub context_block: ContextBlock,
    pub content_error_field: String,
    pub difficulty_scale: LikertScale,
    pub statements: Vec<SurveyStatement>,
    pub statement_scale: LikertScale,
    pub closing_remarks_field: String,
}

pub fn build_instrument(
    q: &QuizQuestion,
    request: Option<&GenerationRequest>,
    graph: Option<&KnowledgeGraph>,
) -> SurveyInstrument {
    SurveyInstrument {
        question_id: q.id.clone(),
        context_block: ContextBlock {
            parameters: request.map(GenerationParameters::from),
            question: instructor_view(q, graph),
        },
        content_error_field: "Describe any content errors or inaccuracies in the question. Leave empty if there are none."
            .to_owned(),
        difficulty_scale: LikertScale::difficulty(),
        statements: STATEMENT_KEYS
            .iter()
            .zip(STATEMENTS)
            .map(|(k, t)| SurveyStatement {
                key: k.to_string(),
                text: t.to_owned(),
            })
            .collect(),
        statement_scale: LikertScale::agreement(),
        closing_remarks_field: "Any further irregularities or remarks about the question.".to_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertResponse {
    pub question_id: String,
    pub expert_id: String,
    pub difficulty: u8,
    pub ratings: Vec<u8>,
    #[serde(default)]
    pub content_errors: String,
    #[serde(default)]
    pub remarks: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurveyError {
    #[error("response refers to unknown question {0}")]
    UnknownQuestionId(String),
    #[error("response of {expert} for {question}: {problem}")]
    InvalidResponse {
        question: String,
        expert: String,
        problem: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl ExpertResponse {
    pub fn validate(&self) -> Result<(), SurveyError> {
        let invalid = |problem: String| SurveyError::InvalidResponse {
            question: self.question_id.clone(),
            expert: self.expert_id.clone(),
            problem,
        };
        if self.ratings.len() != STATEMENTS.len() {
            return Err(invalid(format!(
                "{} ratings instead of {}",
                self.ratings.len(),
                STATEMENTS.len()
            )));
        }
        let scale = LikertScale::agreement();
        if let Some(r) = self.ratings.iter().find(|r| !scale.contains(**r)) {
            return Err(invalid(format!("rating {r} is outside 1..=7")));
        }
        if !LikertScale::difficulty().contains(self.difficulty) {
            return Err(invalid(format!(
                "difficulty {} is outside 1..=5",
                self.difficulty
            )));
        }
        Ok(())
    }

    pub fn reports_error(&self) -> bool {
        !self.content_errors.trim().is_empty()
    }
}

/// One line of JSON per response; blank lines are skipped.
pub fn parse_responses_jsonl(text: &str) -> Result<Vec<ExpertResponse>, SurveyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let response: ExpertResponse =
            serde_json::from_str(line).map_err(|e| SurveyError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        response.validate()?;
        out.push(response);
    }
    Ok(out)
}

pub fn responses_to_jsonl(responses: &[ExpertResponse]) -> String {
    responses
        .iter()
        .map(|r| serde_json::to_string(r).expect("responses serialize") + "\n")
        .collect()
}

/// A surveyed question with the topic it was generated for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub question_id: String,
    pub qtype: QuestionType,
    pub topic: String,
}

impl SurveyItem {
    pub fn new(q: &QuizQuestion, topic: impl Into<String>) -> Self {
        SurveyItem {
            question_id: q.id.clone(),
            qtype: q.qtype,
            topic: topic.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementAgreement {
    pub key: String,
    pub statement: String,
    pub agreed: usize,
    pub rated: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicCounts {
    pub questions: usize,
    pub erroneous: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub total_questions: usize,
    pub rated_questions: usize,
    pub statements: Vec<StatementAgreement>,
    pub erroneous: usize,
    pub topics: BTreeMap<String, TopicCounts>,
    pub question_types: BTreeMap<QuestionType, usize>,
}

/// Upper median: for an even count the higher of the two middle values.
pub fn upper_median(values: &[u8]) -> Option<u8> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted.get(sorted.len() / 2).copied()
}

pub fn aggregate(
    responses: &[ExpertResponse],
    questions: &[SurveyItem],
) -> Result<AggregateReport, SurveyError> {
    let known: HashMap<&str, &SurveyItem> = questions
        .iter()
        .map(|q| (q.question_id.as_str(), q))
        .collect();
    let mut by_question: BTreeMap<&str, Vec<&ExpertResponse>> = BTreeMap::new();
    for r in responses {
        if !known.contains_key(r.question_id.as_str()) {
            return Err(SurveyError::UnknownQuestionId(r.question_id.clone()));
        }
        r.validate()?;
        by_question
            .entry(r.question_id.as_str())
            .or_default()
            .push(r);
    }

    let mut agreed = [0usize; STATEMENTS.len()];
    let mut erroneous_ids = BTreeSet::new();
    for (id, rs) in &by_question {
        for (s, count) in agreed.iter_mut().enumerate() {
            let ratings: Vec<u8> = rs.iter().map(|r| r.ratings[s]).collect();
            if upper_median(&ratings).is_some_and(|m| m >= AGREEMENT_THRESHOLD) {
                *count += 1;
            }
        }
        if rs.iter().any(|r| r.reports_error()) {
            erroneous_ids.insert(*id);
        }
    }

    let mut topics: BTreeMap<String, TopicCounts> = BTreeMap::new();
    let mut question_types: BTreeMap<QuestionType, usize> = [
        QuestionType::MultipleChoice,
        QuestionType::SingleChoice,
        QuestionType::FillInTheBlanks,
    ]
    .into_iter()
    .map(|t| (t, 0))
    .collect();
    for q in questions {
        let t = topics.entry(q.topic.clone()).or_default();
        t.questions += 1;
        if erroneous_ids.contains(q.question_id.as_str()) {
            t.erroneous += 1;
        }
        *question_types.entry(q.qtype).or_default() += 1;
    }

    let rated = by_question.len();
    Ok(AggregateReport {
        total_questions: questions.len(),
        rated_questions: rated,
        statements: STATEMENT_KEYS
            .iter()
            .zip(STATEMENTS)
            .zip(agreed)
            .map(|((k, s), agreed)| StatementAgreement {
                key: k.to_string(),
                statement: s.to_owned(),
                agreed,
                rated,
            })
            .collect(),
        erroneous: erroneous_ids.len(),
        topics,
        question_types,
    })
}

impl AggregateReport {
    pub fn statement(&self, key: &str) -> Option<&StatementAgreement> {
        self.statements.iter().find(|s| s.key == key)
    }

    /// Rows of `section,key,count,total`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "key", "count", "total"])
            .expect("writing to memory");
        let mut row = |section: &str, key: &str, count: usize, total: usize| {
            w.write_record([section, key, &count.to_string(), &total.to_string()])
                .expect("writing to memory");
        };
        for s in &self.statements {
            row("agreement", &s.key, s.agreed, s.rated);
        }
        row("errors", "all", self.erroneous, self.rated_questions);
        for (topic, c) in &self.topics {
            row("topic_errors", topic, c.erroneous, c.questions);
        }
        for (qtype, n) in &self.question_types {
            row(
                "question_type",
                &format!("{qtype:?}"),
                *n,
                self.total_questions,
            );
        }
        let bytes = w.into_inner().expect("in-memory writer");
        String::from_utf8(bytes).expect("csv is utf-8")
    }
}
