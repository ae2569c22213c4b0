mod common;

use common::read_fixture;
use proptest::prelude::*;
use stexquiz_core::question::{from_document, QuestionType};
use stexquiz_core::stex::SourceDocument;
use stexquiz_core::survey::*;

fn reference_items() -> Vec<SurveyItem> {
    read_fixture("survey/reference-counts/questions.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn reference_responses() -> Vec<ExpertResponse> {
    parse_responses_jsonl(&read_fixture("survey/reference-counts/responses.jsonl")).unwrap()
}

#[test]
fn reference_counts() {
    let report = aggregate(&reference_responses(), &reference_items()).unwrap();
    assert_eq!(report.total_questions, 30);
    assert_eq!(report.rated_questions, 30);
    let fit = report.statement("fit").unwrap();
    assert_eq!((fit.agreed, fit.rated), (28, 30));
    let solvable = report.statement("solvable").unwrap();
    assert_eq!((solvable.agreed, solvable.rated), (27, 30));
    assert_eq!(report.erroneous, 11);
    assert_eq!(report.question_types[&QuestionType::SingleChoice], 12);
    assert_eq!(report.question_types[&QuestionType::MultipleChoice], 18);
    assert_eq!(report.question_types[&QuestionType::FillInTheBlanks], 0);
    // errors concentrate in two topics
    let mut by_errors: Vec<_> = report
        .topics
        .iter()
        .map(|(t, c)| (c.erroneous, t.as_str()))
        .collect();
    by_errors.sort();
    by_errors.reverse();
    let top: Vec<&str> = by_errors[..2].iter().map(|(_, t)| *t).collect();
    assert!(top.contains(&"Arc Consistency") && top.contains(&"Semantics of Propositional Logic"));
    assert!(report.topics.values().all(|c| c.questions == 5));
}

#[test]
fn empty_and_ceiling() {
    let empty = aggregate(&[], &[]).unwrap();
    assert_eq!(empty.total_questions, 0);
    assert_eq!(empty.erroneous, 0);
    assert!(empty
        .statements
        .iter()
        .all(|s| s.agreed == 0 && s.rated == 0));

    let item = SurveyItem {
        question_id: "q".into(),
        qtype: QuestionType::SingleChoice,
        topic: "t".into(),
    };
    let all7 = ExpertResponse {
        question_id: "q".into(),
        expert_id: "e".into(),
        difficulty: 3,
        ratings: vec![7; 6],
        content_errors: String::new(),
        remarks: String::new(),
    };
    let report = aggregate(&[all7], &[item]).unwrap();
    assert!(report
        .statements
        .iter()
        .all(|s| s.agreed == 1 && s.rated == 1));
    assert_eq!(report.erroneous, 0);
}

#[test]
fn errors() {
    let mut r = reference_responses().remove(0);
    r.question_id = "nope".into();
    assert_eq!(
        aggregate(&[r.clone()], &reference_items()),
        Err(SurveyError::UnknownQuestionId("nope".into()))
    );
    r.question_id = "survey/strips#p1".into();
    r.ratings = vec![8; 6];
    assert!(matches!(
        aggregate(&[r.clone()], &reference_items()),
        Err(SurveyError::InvalidResponse { .. })
    ));
    r.ratings = vec![4; 5];
    assert!(r.validate().is_err());
    assert!(matches!(
        parse_responses_jsonl("{not json"),
        Err(SurveyError::Malformed { line: 1, .. })
    ));
}

#[test]
fn jsonl_round_trip() {
    let rs = reference_responses();
    assert_eq!(parse_responses_jsonl(&responses_to_jsonl(&rs)).unwrap(), rs);
}

#[test]
fn instrument_shape() {
    let doc = SourceDocument::generated("g", read_fixture("exemplars/scq.tex"));
    let q = &from_document(&doc).unwrap().questions[0];
    let inst = build_instrument(q, None, None);
    assert_eq!(inst.statements.len(), 6);
    assert_eq!(
        inst.statements[0].text,
        "The GQ has a good FIT in terms of teaching material."
    );
    assert_eq!((inst.statement_scale.min, inst.statement_scale.max), (1, 7));
    assert_eq!(
        (inst.difficulty_scale.min, inst.difficulty_scale.max),
        (1, 5)
    );
    assert_eq!(inst.statement_scale.labels[0], "Strongly Disagree");
    assert_eq!(inst.statement_scale.labels[6], "Strongly Agree");
    assert_eq!(inst.difficulty_scale.labels[0], "Very Difficult");
    assert_eq!(inst.difficulty_scale.labels[4], "Very Easy");
    // the instrument shows the instructor rendering
    assert!(inst.context_block.question.options[1].correct);
}

#[test]
fn csv_export() {
    let report = aggregate(&reference_responses(), &reference_items()).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("section,key,count,total"));
    assert!(csv.contains("agreement,fit,28,30\n"));
    assert!(csv.contains("errors,all,11,30\n"));
    assert!(csv.contains("question_type,SingleChoice,12,30\n"));
}

/// Sorting-based oracle with ties going to the higher middle value.
fn median_oracle(values: &[u8]) -> u8 {
    let n = values.len();
    let mut v = values.to_vec();
    v.sort();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        v[n / 2 - 1].max(v[n / 2])
    }
}

fn arb_responses() -> impl Strategy<Value = Vec<ExpertResponse>> {
    prop::collection::vec(
        (
            0..4usize,
            0..3usize,
            prop::collection::vec(1u8..=7, 6),
            any::<bool>(),
        ),
        0..24,
    )
    .prop_map(|rows| {
        let mut seen = std::collections::BTreeSet::new();
        rows.into_iter()
            .filter(|(q, e, _, _)| seen.insert((*q, *e)))
            .map(|(q, e, ratings, err)| ExpertResponse {
                question_id: format!("q{q}"),
                expert_id: format!("e{e}"),
                difficulty: 3,
                ratings,
                content_errors: if err { "x".into() } else { String::new() },
                remarks: String::new(),
            })
            .collect()
    })
}

fn items() -> Vec<SurveyItem> {
    (0..4)
        .map(|i| SurveyItem {
            question_id: format!("q{i}"),
            qtype: if i % 2 == 0 {
                QuestionType::SingleChoice
            } else {
                QuestionType::MultipleChoice
            },
            topic: format!("t{}", i / 2),
        })
        .collect()
}

proptest! {
    #[test]
    fn median_matches_oracle(values in prop::collection::vec(1u8..=7, 1..9)) {
        prop_assert_eq!(upper_median(&values), Some(median_oracle(&values)));
    }

    #[test]
    fn permutation_invariant(rs in arb_responses(), seed in any::<u64>()) {
        let mut shuffled = rs.clone();
        // deterministic rotation plus reversal as the permutation
        if !shuffled.is_empty() {
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            if seed % 2 == 0 {
                shuffled.reverse();
            }
        }
        prop_assert_eq!(aggregate(&rs, &items()).unwrap(), aggregate(&shuffled, &items()).unwrap());
    }

    #[test]
    fn raising_a_rating_never_lowers_agreement(rs in arb_responses(), pick in any::<prop::sample::Index>(), s in 0..6usize) {
        prop_assume!(!rs.is_empty());
        let before = aggregate(&rs, &items()).unwrap();
        let mut raised = rs.clone();
        let i = pick.index(raised.len());
        raised[i].ratings[s] = (raised[i].ratings[s] + 1).min(7);
        let after = aggregate(&raised, &items()).unwrap();
        for (a, b) in before.statements.iter().zip(&after.statements) {
            prop_assert!(b.agreed >= a.agreed);
            prop_assert_eq!(a.rated, b.rated);
        }
        // denominators count distinct rated questions
        let distinct: std::collections::BTreeSet<_> = rs.iter().map(|r| &r.question_id).collect();
        prop_assert!(before.statements.iter().all(|st| st.rated == distinct.len()));
    }
}
