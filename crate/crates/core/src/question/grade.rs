use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GradingKind, QuestionType, QuizQuestion};

pub const DEFAULT_POINTS: f64 = 1.0;

/// Option indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudentResponse {
    Selected(BTreeSet<usize>),
    Typed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    Chosen,
    MissedCorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggeredFeedback {
    pub index: usize,
    pub feedback: String,
    pub reason: TriggerReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeResult {
    pub correct: bool,
    pub points: f64,
    pub triggered_feedback: Vec<TriggeredFeedback>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradeError {
    #[error("a {expected} question cannot be answered with {got}")]
    ShapeMismatch { expected: &'static str, got: String },
    #[error("option {index} does not exist (the question has {options})")]
    IndexOutOfRange { index: usize, options: usize },
}

/// Exact-set grading. Points come from `default_points` unless the
/// question declares grading actions, in which case the actions of the
/// chosen options are folded in option order and floored at 0.
pub fn grade(
    q: &QuizQuestion,
    response: &StudentResponse,
    default_points: f64,
) -> Result<GradeResult, GradeError> {
    match (q.qtype, response) {
        (QuestionType::FillInTheBlanks, StudentResponse::Typed(typed)) => {
            let correct = q.fib_solution.as_deref() == Some(typed.trim());
            Ok(GradeResult {
                correct,
                points: if correct { default_points } else { 0.0 },
                triggered_feedback: Vec::new(),
            })
        }
        (QuestionType::FillInTheBlanks, StudentResponse::Selected(_)) => {
            Err(GradeError::ShapeMismatch {
                expected: q.qtype.label(),
                got: "selected options".to_owned(),
            })
        }
        (_, StudentResponse::Typed(_)) => Err(GradeError::ShapeMismatch {
            expected: q.qtype.label(),
            got: "typed text".to_owned(),
        }),
        (QuestionType::SingleChoice, StudentResponse::Selected(sel)) if sel.len() > 1 => {
            Err(GradeError::ShapeMismatch {
                expected: q.qtype.label(),
                got: format!("{} selected options", sel.len()),
            })
        }
        (_, StudentResponse::Selected(sel)) => grade_choice(q, sel, default_points),
    }
}

fn grade_choice(
    q: &QuizQuestion,
    selected: &BTreeSet<usize>,
    default_points: f64,
) -> Result<GradeResult, GradeError> {
    if let Some(&index) = selected.iter().find(|&&i| i >= q.options.len()) {
        return Err(GradeError::IndexOutOfRange {
            index,
            options: q.options.len(),
        });
    }
    let correct = q
        .options
        .iter()
        .enumerate()
        .all(|(i, o)| o.correct == selected.contains(&i));

    let points = if q.options.iter().all(|o| o.grading_action.is_none()) {
        if correct {
            default_points
        } else {
            0.0
        }
    } else {
        let mut points = 0.0_f64;
        for i in selected {
            if let Some(action) = q.options[*i].grading_action {
                match action.kind {
                    GradingKind::Set => points = action.points,
                    GradingKind::Add => points += action.points,
                    GradingKind::Deduct => points -= action.points,
                }
            }
        }
        points.max(0.0)
    };

    let mut triggered_feedback = Vec::new();
    for (i, option) in q.options.iter().enumerate() {
        let reason = if selected.contains(&i) {
            TriggerReason::Chosen
        } else if option.correct {
            TriggerReason::MissedCorrect
        } else {
            continue;
        };
        if let Some(feedback) = &option.feedback {
            triggered_feedback.push(TriggeredFeedback {
                index: i,
                feedback: feedback.clone(),
                reason,
            });
        }
    }
    Ok(GradeResult {
        correct,
        points,
        triggered_feedback,
    })
}
