use std::collections::BTreeSet;

use super::*;
use crate::graph::build_graph;
use crate::stex::{parse_document, SourceDocument};

const MCQ: &str = include_str!("../../../../fixtures/exemplars/mcq.tex");

fn extract(text: &str) -> Extracted {
    from_document(&SourceDocument::generated("gen/t", text)).unwrap()
}

fn arith_graph() -> crate::graph::KnowledgeGraph {
    build_graph(&[SourceDocument::course(
        "doc",
        "\\begin{smodule}{arith}\n\\symdecl{plus}\n\\begin{sdefinition}[for=plus]\\definiendum{plus}{addition}\\end{sdefinition}\n\\end{smodule}\n",
    )])
    .unwrap()
}

fn problem(body: &str) -> String {
    format!("\\begin{{sproblem}}\n{body}\n\\end{{sproblem}}\n")
}

#[test]
fn mcq_exemplar_extracts() {
    let ex = extract(MCQ);
    assert!(ex.rejects.is_empty());
    assert_eq!(ex.questions.len(), 1);
    let q = &ex.questions[0];
    assert_eq!(q.id, "gen/t#p1");
    assert_eq!(q.doc_id(), "gen/t");
    assert_eq!(q.qtype, QuestionType::MultipleChoice);
    assert_eq!(q.options.len(), 5);
    assert_eq!(q.correct_indices(), vec![3, 4]);
    assert_eq!(q.objectives.len(), 3);
    assert_eq!(q.used_modules.len(), 3);
    assert_eq!(q.source, MCQ.trim_end());
    assert!(q.options[0]
        .feedback
        .as_deref()
        .unwrap()
        .starts_with("No, $f$"));
    assert!(q.options[3].feedback.is_none());
    assert!(q.stem_plain().contains("Which of the following are"));
}

#[test]
fn canonical_source_from_ast() {
    let ast = parse_document(&SourceDocument::generated("g", MCQ)).unwrap();
    let ex = from_ast(&ast);
    let reparsed = extract(&ex.questions[0].source);
    assert_eq!(reparsed.questions[0].correct_indices(), vec![3, 4]);
}

#[test]
fn empty_document() {
    assert_eq!(extract(""), Extracted::default());
}

#[test]
fn scb_with_two_true_is_rejected_with_candidate() {
    let ex = extract(&problem(
        "Pick.\n\\begin{scb}\\scc[T]{a}\\scc[T]{b}\\scc[F]{c}\\end{scb}",
    ));
    assert!(ex.questions.is_empty());
    assert_eq!(ex.rejects[0].reason, RejectReason::SingleChoiceMultipleTrue);
    assert!(ex.rejects[0].candidate.is_some());
}

#[test]
fn invariant_rejects() {
    let cases = [
        (
            "\\begin{scb}\\scc[F]{a}\\scc{b}\\end{scb}",
            RejectReason::SingleChoiceNoTrue,
        ),
        (
            "\\begin{mcb}\\mcc[F]{a}\\end{mcb}",
            RejectReason::MultipleChoiceNoTrue,
        ),
        (
            "x = \\fillinsol{\\frac12}",
            RejectReason::FillInNotPlainText,
        ),
        ("no answer here", RejectReason::NoAnswerBlock),
        (
            "\\begin{mcb}\\mcc[T]{a}\\end{mcb}\\begin{scb}\\scc[T]{a}\\end{scb}",
            RejectReason::MultipleAnswerBlocks,
        ),
        (
            "\\fillinsol{1} and \\fillinsol{2}",
            RejectReason::MultipleAnswerBlocks,
        ),
        (
            "\\begin{mcb}\\mcc[T,add=-1]{a}\\end{mcb}",
            RejectReason::InvalidGradingAction("add=-1".into()),
        ),
        (
            "\\begin{mcb}\\mcc[T,set=x]{a}\\end{mcb}",
            RejectReason::InvalidGradingAction("set=x".into()),
        ),
    ];
    for (body, reason) in cases {
        let ex = extract(&problem(body));
        assert!(ex.questions.is_empty(), "{body}");
        assert_eq!(ex.rejects.len(), 1, "{body}");
        assert_eq!(ex.rejects[0].reason, reason, "{body}");
        assert_eq!(
            ex.rejects[0].candidate.is_some(),
            reason.has_candidate(),
            "{body}"
        );
    }
}

#[test]
fn blank_feedback_is_absent() {
    let ex = extract(&problem("\\begin{mcb}\\mcc[T,feedback={  }]{a}\\end{mcb}"));
    assert_eq!(ex.questions[0].options[0].feedback, None);
}

#[test]
fn preconditions_and_dimension_spelling() {
    let ex = extract(&problem(
        "\\objective{analyse}{x}\\precondition{remember}{y}\n\\begin{mcb}\\mcc[T]{a}\\end{mcb}",
    ));
    let q = &ex.questions[0];
    assert_eq!(q.objectives[0].parsed_dimension(), Some(Dimension::Analyze));
    assert_eq!(q.preconditions[0].symbol, "y");
    assert_eq!("analyze".parse::<Dimension>().unwrap(), Dimension::Analyze);
    assert!("recall".parse::<Dimension>().is_err());
}

#[test]
fn enclosing_module_is_recorded() {
    let ex = extract("\\begin{smodule}{m}\n\\begin{smodule}{inner}\n\\begin{sproblem}\\fillinsol{3}\\end{sproblem}\\end{smodule}\\end{smodule}");
    assert_eq!(
        ex.questions[0].enclosing_module.as_deref(),
        Some("gen/t?m/inner")
    );
}

#[test]
fn plus_prerequisite() {
    let graph = arith_graph();
    let ex = extract(&problem(
        "\\usemodule{arith}\nwhat is 2 \\symref{plus}{added to} 2? \\fillinsol{4}",
    ));
    let pre = extract_prerequisites(&ex.questions[0], &graph);
    assert_eq!(
        pre.pairs,
        vec![ResolvedPair {
            dimension: Dimension::Remember,
            symbol: SymbolId("doc?arith?plus".into()),
        }]
    );
    assert!(pre.unresolved.is_empty());
}

#[test]
fn prerequisites_union_sorted() {
    let graph = arith_graph();
    let ex = extract(&problem(
        "\\usemodule{arith}\\precondition{understand}{plus}\n\\sn{plus} \\sn{plus} \\sn{minus}? \\fillinsol{4}",
    ));
    let pre = extract_prerequisites(&ex.questions[0], &graph);
    let got: Vec<_> = pre
        .pairs
        .iter()
        .map(|p| (p.dimension, p.symbol.as_str()))
        .collect();
    assert_eq!(
        got,
        vec![
            (Dimension::Remember, "doc?arith?plus"),
            (Dimension::Understand, "doc?arith?plus")
        ]
    );
    assert_eq!(pre.unresolved.len(), 1);
    assert_eq!(pre.unresolved[0].name, "minus");

    let none = extract(&problem("what is 2+2? \\fillinsol{4}"));
    assert_eq!(
        extract_prerequisites(&none.questions[0], &graph),
        Prerequisites::default()
    );
}

fn sel(ix: &[usize]) -> StudentResponse {
    StudentResponse::Selected(ix.iter().copied().collect::<BTreeSet<_>>())
}

#[test]
fn grading_examples() {
    let q = &extract(MCQ).questions[0];
    let right = grade(q, &sel(&[3, 4]), DEFAULT_POINTS).unwrap();
    assert!(right.correct);
    assert_eq!(right.points, 1.0);
    let partial = grade(q, &sel(&[3]), DEFAULT_POINTS).unwrap();
    assert!(!partial.correct);
    assert_eq!(partial.points, 0.0);
    assert!(partial.triggered_feedback.is_empty());
    let wrong = grade(q, &sel(&[0, 3, 4]), DEFAULT_POINTS).unwrap();
    assert_eq!(wrong.triggered_feedback.len(), 1);
    assert_eq!(wrong.triggered_feedback[0].reason, TriggerReason::Chosen);
    assert_eq!(
        grade(q, &sel(&[5]), 1.0),
        Err(GradeError::IndexOutOfRange {
            index: 5,
            options: 5
        })
    );
    assert!(matches!(
        grade(q, &StudentResponse::Typed("x".into()), 1.0),
        Err(GradeError::ShapeMismatch { .. })
    ));

    let fib = &extract(&problem("x = \\fillinsol{42}")).questions[0];
    let typed = |s: &str| {
        grade(fib, &StudentResponse::Typed(s.into()), 1.0)
            .unwrap()
            .correct
    };
    assert!(typed("  42 "));
    assert!(!typed("42."));
    assert!(!typed("4 2"));
}

#[test]
fn single_choice_shape() {
    let q = &extract(&problem(
        "\\begin{scb}\\scc[F,feedback=no]{a}\\scc[T,feedback=yes]{b}\\end{scb}",
    ))
    .questions[0];
    assert!(grade(q, &sel(&[1]), 1.0).unwrap().correct);
    assert!(!grade(q, &sel(&[]), 1.0).unwrap().correct);
    let missed = grade(q, &sel(&[0]), 1.0).unwrap();
    let reasons: Vec<_> = missed
        .triggered_feedback
        .iter()
        .map(|t| (t.index, t.reason))
        .collect();
    assert_eq!(
        reasons,
        vec![
            (0, TriggerReason::Chosen),
            (1, TriggerReason::MissedCorrect)
        ]
    );
    assert!(matches!(
        grade(q, &sel(&[0, 1]), 1.0),
        Err(GradeError::ShapeMismatch { .. })
    ));
}

#[test]
fn grading_actions_fold_in_option_order() {
    let q = &extract(&problem(
        "\\begin{mcb}\\mcc[T,add=2]{a}\\mcc[T,set=5]{b}\\mcc[F,deduct=9]{c}\\mcc[T]{d}\\end{mcb}",
    ))
    .questions[0];
    assert_eq!(grade(q, &sel(&[0, 1]), 1.0).unwrap().points, 5.0);
    assert_eq!(grade(q, &sel(&[0]), 1.0).unwrap().points, 2.0);
    assert_eq!(grade(q, &sel(&[0, 2]), 1.0).unwrap().points, 0.0);
    // correct, but points come from the declared actions only
    assert_eq!(grade(q, &sel(&[0, 1, 3]), 1.0).unwrap().points, 5.0);
}

#[test]
fn render_views() {
    let q = &extract(&problem(
        "\\usemodule{arith}\nIs \\sn{plus} <fun>?\\begin{mcb}\\mcc[T,feedback={yes \\sn{plus}}]{\\sr{plus}{adding}}\\mcc[F,feedback=no]{b}\\end{mcb}",
    ))
    .questions[0];
    let graph = arith_graph();
    let student = serde_json::to_string(&student_view(q, Some(&graph))).unwrap();
    assert!(
        student.contains(r#"data-symbol=\"doc?arith?plus\""#),
        "{student}"
    );
    assert!(student.contains("&lt;fun&gt;"));
    for key in ["correct", "feedback", "\"T\"", "\"F\""] {
        assert!(!student.contains(key), "{key} leaked: {student}");
    }
    let instructor = instructor_view(q, Some(&graph));
    assert!(instructor.options[0].correct);
    assert!(instructor.options[0]
        .feedback_html
        .as_deref()
        .unwrap()
        .contains("data-symbol=\"doc?arith?plus\""));
    assert!(instructor.options[0]
        .html
        .contains("data-verbalization=\"adding\""));

    let fib = &extract(&problem("x = \\fillinsol{42}")).questions[0];
    let sv = serde_json::to_string(&student_view(fib, None)).unwrap();
    assert!(!sv.contains("42"));
    assert!(instructor_view(fib, None)
        .stem_html
        .contains("data-solution=\"42\""));
}
