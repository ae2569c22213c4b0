//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p stexquiz-app --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use stexquiz_core::context::build_context;
use stexquiz_core::graph::{build_graph, load_manifest, Granularity, KnowledgeGraph, SymbolId};
use stexquiz_core::prompt::{build_prompt, GenerationRequest, MasterPromptTemplate};
use stexquiz_core::question::{
    extract_prerequisites, from_document, grade, Dimension, QuestionType, QuizQuestion,
    StudentResponse,
};
use stexquiz_core::stex::{parse_document, serialize, SourceDocument};
use stexquiz_core::survey::{aggregate, parse_responses_jsonl, SurveyItem};
use stexquiz_core::validate::{validate, validate_document, IssueCode, Severity, Verdict};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    common::fixtures()
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn corpus() -> KnowledgeGraph {
    build_graph(&load_manifest(&common::manifest()).unwrap()).unwrap()
}

fn tex_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            tex_files(&path, out);
        } else if path.extension().is_some_and(|e| e == "tex") {
            out.push(path);
        }
    }
}

/// (path relative to fixtures/, text), sorted, without the files meant to
/// fail parsing.
fn parseable_tex() -> Vec<(String, String)> {
    let mut paths = Vec::new();
    tex_files(&fixtures(), &mut paths);
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let rel = p
                .strip_prefix(fixtures())
                .unwrap()
                .to_string_lossy()
                .into_owned();
            (rel, std::fs::read_to_string(&p).unwrap())
        })
        .filter(|(_, t)| !t.starts_with("% expect: PARSE_ERROR"))
        .collect()
}

fn questions_in(dir: &str) -> Vec<(String, QuizQuestion)> {
    parseable_tex()
        .into_iter()
        .filter(|(rel, _)| rel.starts_with(dir))
        .flat_map(|(rel, text)| {
            let doc = SourceDocument::generated(rel.trim_end_matches(".tex"), text);
            from_document(&doc)
                .unwrap()
                .questions
                .into_iter()
                .map(move |q| (rel.clone(), q))
        })
        .collect()
}

fn parser_round_trip() -> Outcome {
    let start = Instant::now();
    let files = parseable_tex();
    ensure!(files.len() >= 25, "only {} files", files.len());
    for name in [
        "exemplars/mcq.tex",
        "exemplars/scq.tex",
        "exemplars/fib.tex",
    ] {
        ensure!(files.iter().any(|(rel, _)| rel == name), "{name} missing");
    }
    let mut ok = 0;
    for (rel, text) in &files {
        let first = parse_document(&SourceDocument::course(rel.clone(), text.clone()))
            .map_err(|e| format!("{rel}: {e}"))?;
        let printed = serialize(&first.root);
        let second = parse_document(&SourceDocument::course(rel.clone(), printed))
            .map_err(|e| format!("{rel}: {e}"))?;
        ensure!(
            first.same_structure(&second),
            "{rel} differs after round trip"
        );
        ok += 1;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{ok}/{} files, {elapsed:.2?}", files.len()))
}

fn prerequisite_rule() -> Outcome {
    let graph = build_graph(&[SourceDocument::course(
        "doc",
        "\\begin{smodule}{arith}\n\\symdecl{plus}\n\\begin{sdefinition}[for=plus]\\definiendum{plus}{addition}\\end{sdefinition}\n\\end{smodule}\n",
    )])
    .map_err(|e| e.to_string())?;
    let doc = SourceDocument::generated(
        "gen/plus",
        "\\begin{sproblem}\n\\usemodule{arith}\nWhat is 2 \\symref{plus}{plus} 2? \\fillinsol{4}\n\\end{sproblem}\n",
    );
    let q = &from_document(&doc).map_err(|e| e.to_string())?.questions[0];
    let pre = extract_prerequisites(q, &graph);
    let got: Vec<(Dimension, String)> = pre
        .pairs
        .iter()
        .map(|p| (p.dimension, p.symbol.0.clone()))
        .collect();
    ensure!(
        got == vec![(Dimension::Remember, "doc?arith?plus".to_owned())]
            && pre.unresolved.is_empty(),
        "got {got:?}"
    );
    Ok("[(remember, plus)]".into())
}

/// Exact-set rule, straight from its definition.
fn exact_set(q: &QuizQuestion, selected: &BTreeSet<usize>) -> bool {
    let truth: BTreeSet<usize> = (0..q.options.len())
        .filter(|&i| q.options[i].correct)
        .collect();
    match q.qtype {
        QuestionType::MultipleChoice => *selected == truth,
        QuestionType::SingleChoice => selected.len() == 1 && selected == &truth,
        QuestionType::FillInTheBlanks => unreachable!(),
    }
}

fn grading_oracle() -> Outcome {
    let (mut questions, mut cases, mut disagreements) = (0, 0, 0);
    for dir in ["exemplars/", "questions/", "mutants/"] {
        for (_, q) in questions_in(dir) {
            if q.qtype == QuestionType::FillInTheBlanks || q.options.len() > 4 {
                continue;
            }
            let n = q.options.len();
            // every subset, single choice included: a multi-tick response
            // to a single-choice question is simply wrong
            for mask in 0..1u32 << n {
                let sel: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                let got =
                    grade(&q, &StudentResponse::Selected(sel.clone()), 1.0).map(|g| g.correct);
                match got {
                    Ok(c) if c == exact_set(&q, &sel) => {}
                    // out-of-shape responses may be refused instead of graded
                    Err(_) if q.qtype == QuestionType::SingleChoice && sel.len() != 1 => {}
                    _ => disagreements += 1,
                }
                cases += 1;
            }
            questions += 1;
        }
    }
    ensure!(
        disagreements == 0,
        "{disagreements} disagreements in {cases} cases"
    );
    ensure!(questions >= 12, "only {questions} questions");

    let doc = SourceDocument::generated("fib", read("exemplars/fib.tex"));
    let q = &from_document(&doc).map_err(|e| e.to_string())?.questions[0];
    let answer = q
        .fib_solution
        .clone()
        .ok_or("fib exemplar has no solution")?;
    let trim_cases = [
        (answer.clone(), true),
        (format!("  {answer} "), true),
        (format!("\t{answer}\n"), true),
        (format!("{answer}."), false),
        (format!("{answer} {answer}"), false),
        (String::new(), false),
    ];
    for (typed, expected) in &trim_cases {
        let got =
            grade(q, &StudentResponse::Typed(typed.clone()), 1.0).map_err(|e| e.to_string())?;
        ensure!(
            got.correct == *expected,
            "fib {typed:?}: got {}",
            got.correct
        );
    }
    Ok(format!(
        "{questions} questions, {cases} responses, 0 disagreements; {} trim cases",
        trim_cases.len()
    ))
}

fn validator_seeded_defects() -> Outcome {
    let graph = corpus();
    for name in ["mcq", "scq", "fib"] {
        let doc = SourceDocument::generated(
            format!("exemplars/{name}"),
            read(&format!("exemplars/{name}.tex")),
        );
        let q = &from_document(&doc).map_err(|e| e.to_string())?.questions[0];
        let report = validate(q, &graph, None);
        ensure!(
            report.verdict == Verdict::Pass,
            "exemplar {name}: {:?}",
            report.codes()
        );
    }

    let base: GenerationRequest =
        serde_json::from_str(&read("requests/arc-consistency.json")).unwrap();
    let mut mutant_count = 0;
    // (expected, flagged) per mutant, Error codes only
    let mut rows: Vec<(String, Option<IssueCode>, BTreeSet<IssueCode>)> = Vec::new();
    for (rel, text) in std::iter::once(()).flat_map(|_| {
        let mut paths = Vec::new();
        tex_files(&fixtures().join("mutants"), &mut paths);
        paths.sort();
        paths.into_iter().map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(p).unwrap(),
            )
        })
    }) {
        let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('%')).collect();
        let expect = header
            .iter()
            .find_map(|l| l.strip_prefix("% expect: "))
            .and_then(|c| IssueCode::parse(c.trim()))
            .ok_or_else(|| format!("{rel}: no expect line"))?;
        let request = header
            .iter()
            .find_map(|l| l.strip_prefix("% allowed: "))
            .map(|types| {
                let mut r = base.clone();
                r.allowed_types = types
                    .split(',')
                    .map(|t| serde_json::from_str(&format!("\"{}\"", t.trim())).unwrap())
                    .collect();
                r
            });
        let reports = validate_document(
            &SourceDocument::generated(format!("mutants/{rel}"), text.clone()),
            &graph,
            request.as_ref(),
        );
        let flagged: BTreeSet<IssueCode> = reports
            .iter()
            .flat_map(|r| r.codes())
            .filter(|c| c.severity() == Severity::Error)
            .collect();
        let expected = (expect.severity() == Severity::Error).then_some(expect);
        rows.push((rel, expected, flagged));
        mutant_count += 1;
    }
    ensure!(mutant_count >= 18, "only {mutant_count} mutants");

    let error_codes: Vec<IssueCode> = IssueCode::ALL
        .iter()
        .copied()
        .filter(|c| c.severity() == Severity::Error)
        .collect();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut per_code: BTreeMap<IssueCode, usize> = BTreeMap::new();
    for code in &error_codes {
        for (rel, expected, flagged) in &rows {
            match (*expected == Some(*code), flagged.contains(code)) {
                (true, true) => {
                    tp += 1;
                    *per_code.entry(*code).or_default() += 1;
                }
                (false, true) => {
                    fp += 1;
                    eprintln!("  false positive {code} on {rel}");
                }
                (true, false) => {
                    fn_ += 1;
                    eprintln!("  missed {code} on {rel}");
                }
                (false, false) => {}
            }
        }
    }
    let missing: Vec<&IssueCode> = error_codes
        .iter()
        .filter(|c| !per_code.contains_key(c))
        .collect();
    ensure!(missing.is_empty(), "no mutant triggers {missing:?}");
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    ensure!(
        fp == 0 && fn_ == 0,
        "precision {precision:.3}, recall {recall:.3}"
    );
    Ok(format!(
        "{mutant_count} mutants, {} error codes, precision {precision:.1} recall {recall:.1}; exemplars Pass",
        error_codes.len()
    ))
}

fn replay_determinism() -> Outcome {
    let start = Instant::now();
    let mut trees = Vec::new();
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let app = common::replay_app(dir.path(), "arc-consistency-session");
        let result = app
            .generate(&common::request(), None)
            .map_err(|e| e.to_string())?;
        ensure!(result.drafts.len() == 5, "{} drafts", result.drafts.len());
        let persisted: Vec<_> = common::tree(dir.path())
            .into_iter()
            .filter(|(p, _)| p.starts_with("draft") || p.starts_with("transcript"))
            .collect();
        trees.push(persisted);
        dirs.push(dir);
    }
    let elapsed = start.elapsed();
    ensure!(!trees[0].is_empty(), "nothing persisted");
    ensure!(
        trees[0] == trees[1],
        "persisted drafts or transcripts differ"
    );
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "{} files byte-identical, {elapsed:.2?}",
        trees[0].len()
    ))
}

/// Fragment indices under a section, collected by walking its subtree.
fn section_fragments(graph: &KnowledgeGraph, node: usize, out: &mut BTreeSet<usize>) {
    let s = &graph.sections[node];
    out.extend(s.fragment_start..s.fragment_end);
    for &child in &s.children {
        section_fragments(graph, child, out);
    }
}

fn retrieval() -> Outcome {
    let graph = corpus();
    ensure!(
        graph.section_roots.len() == 6,
        "{} top-level sections",
        graph.section_roots.len()
    );
    let mut titles = Vec::new();
    for &root in &graph.section_roots {
        let title = &graph.sections[root].title;
        let mut expected = BTreeSet::new();
        section_fragments(&graph, root, &mut expected);
        // a concept defined inside this section
        let symbol: SymbolId = graph
            .symbols
            .values()
            .find(|s| {
                s.defining_fragments
                    .first()
                    .and_then(|f| graph.fragment_index(f))
                    .is_some_and(|i| expected.contains(&i))
            })
            .map(|s| s.id.clone())
            .ok_or_else(|| format!("no concept is defined in {title}"))?;
        let bundle = build_context(&graph, &symbol, Granularity::Section, usize::MAX / 4)
            .map_err(|e| e.to_string())?;
        let got: Vec<&str> = bundle
            .entries
            .iter()
            .map(|e| e.fragment_id.as_str())
            .collect();
        let want: Vec<&str> = expected
            .iter()
            .map(|&i| graph.fragments[i].id.as_str())
            .collect();
        ensure!(got == want, "{title}: got {got:?}, want {want:?}");
        ensure!(!bundle.truncated, "{title}: truncated");
        let rendered = bundle.render();
        let mut rest = rendered.as_str();
        for e in &bundle.entries {
            let block = format!(
                "{}\n{}\n\n",
                e.fragment_id,
                graph.fragment(&e.fragment_id).unwrap().text
            );
            ensure!(
                rest.starts_with(&block),
                "{title}: {} is not prefixed with its id",
                e.fragment_id
            );
            rest = &rest[block.len()..];
        }
        titles.push(format!("{title} ({})", want.len()));
    }
    Ok(titles.join(", "))
}

fn survey_counts() -> Outcome {
    let items: Vec<SurveyItem> = read("survey/reference-counts/questions.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let responses = parse_responses_jsonl(&read("survey/reference-counts/responses.jsonl"))
        .map_err(|e| e.to_string())?;
    let report = aggregate(&responses, &items).map_err(|e| e.to_string())?;
    let stat = |k: &str| report.statement(k).map(|s| (s.agreed, s.rated));
    let types = |t| report.question_types.get(&t).copied().unwrap_or(0);
    let got = (
        stat("fit"),
        stat("solvable"),
        report.erroneous,
        report.total_questions,
        types(QuestionType::SingleChoice),
        types(QuestionType::MultipleChoice),
        types(QuestionType::FillInTheBlanks),
    );
    ensure!(
        got == (Some((28, 30)), Some((27, 30)), 11, 30, 12, 18, 0),
        "got {got:?}"
    );
    Ok("fit 28/30, solvable 27/30, erroneous 11/30, types SC 12 / MC 18 / FIB 0".into())
}

const CRITERIA_SENTENCES: [&str; 6] = [
    "rote-memorize",
    "directly states which answer is",
    "limited to replying",
    "The correct answer must be unambiguous",
    "automatically via string matching",
    "variety of question formats",
];

fn prompt_snapshot() -> Outcome {
    let graph = corpus();
    let bundle = build_prompt(&graph, &MasterPromptTemplate::default(), &common::request())
        .map_err(|e| e.to_string())?;
    let stored = read("snapshots/prompt-arc-consistency.txt");
    ensure!(stored == bundle.prompt, "prompt differs from the snapshot");
    let missing: Vec<&&str> = CRITERIA_SENTENCES
        .iter()
        .filter(|s| !stored.contains(**s))
        .collect();
    ensure!(missing.is_empty(), "missing criteria {missing:?}");
    let mcq_true = stored
        .split("```")
        .skip(1)
        .step_by(2)
        .filter_map(|block| from_document(&SourceDocument::generated("snapshot", block)).ok())
        .flat_map(|ex| ex.questions)
        .filter(|q| q.qtype == QuestionType::MultipleChoice)
        .map(|q| q.correct_indices().len())
        .max()
        .unwrap_or(0);
    ensure!(mcq_true >= 2, "MCQ exemplar has {mcq_true} true options");
    Ok(format!(
        "{} bytes, 6 criteria, MCQ with {mcq_true} true options",
        stored.len()
    ))
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 8] = [
        ("parser round-trip", parser_round_trip),
        ("prerequisite rule", prerequisite_rule),
        ("grading oracle", grading_oracle),
        ("validator seeded defects", validator_seeded_defects),
        ("pipeline replay determinism", replay_determinism),
        ("retrieval", retrieval),
        ("survey aggregates", survey_counts),
        ("prompt snapshot", prompt_snapshot),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
