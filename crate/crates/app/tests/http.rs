mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::*;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use stexquiz_app::http::router;
use tower::ServiceExt;

fn enc(id: &str) -> String {
    stexquiz_app::store::encode_id(id)
}

async fn call(
    app: &Arc<stexquiz_app::App>,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = router(app.clone())
        .oneshot(req.body(body).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

async fn json_call(
    app: &Arc<stexquiz_app::App>,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn has_key(v: &Value, key: &str) -> bool {
    match v {
        Value::Object(m) => m.contains_key(key) || m.values().any(|x| has_key(x, key)),
        Value::Array(a) => a.iter().any(|x| has_key(x, key)),
        _ => false,
    }
}

#[tokio::test]
async fn full_review_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let app = Arc::new(replay_app(tmp.path(), "arc-consistency-session"));
    let request = serde_json::to_value(request()).unwrap();

    let (s, corpora) = json_call(&app, "GET", "/corpora", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(corpora, json!(["ai-course-mini"]));
    let (s, symbols) = json_call(
        &app,
        "GET",
        "/corpora/ai-course-mini/symbols?query=ac-3",
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(symbols[0]["name"], "ac-3");

    let (s, generated) = json_call(&app, "POST", "/generate", Some(request.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    let drafts = generated["drafts"].as_array().unwrap();
    assert_eq!(drafts.len(), 5);
    assert_eq!(drafts[4]["verdict"], "Fail");
    assert_eq!(drafts[0]["render"]["variant"], "instructor");
    let id = drafts[0]["id"].as_str().unwrap().to_owned();
    assert!(id.contains('/') && id.contains('#'));

    let (s, view) = json_call(&app, "GET", &format!("/drafts/{}", enc(&id)), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(view, drafts[0]);
    assert!(view["render"]["options"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o["correct"] == true));

    let (s, student) = json_call(&app, "GET", &format!("/drafts/{}/student", enc(&id)), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(student["variant"], "student");
    for secret in [
        "correct",
        "feedback_html",
        "grading_action",
        "source",
        "fib_solution",
    ] {
        assert!(!has_key(&student, secret), "{secret}");
    }

    let (s, transcript) = json_call(
        &app,
        "GET",
        &format!("/drafts/{}/transcript", enc(&id)),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(transcript["format"], "stexquiz-transcript/1");

    let (s, grade) = json_call(
        &app,
        "POST",
        &format!("/drafts/{}/grade", enc(&id)),
        Some(json!({"selected": [1]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(grade["correct"], true);

    let (s, reviewed) = json_call(
        &app,
        "POST",
        &format!("/drafts/{}/review", enc(&id)),
        Some(json!({"status": "Accepted"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(reviewed["review_status"], "Accepted");
    assert_eq!(reviewed["revision"], 2);

    let (s, listed) = json_call(&app, "GET", "/drafts?status=Accepted", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(listed.as_array().unwrap().len(), 1);

    let (s, instrument) =
        json_call(&app, "GET", &format!("/drafts/{}/survey", enc(&id)), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(instrument["statements"].as_array().unwrap().len(), 6);

    let response = json!({
        "question_id": id, "expert_id": "e1", "difficulty": 2,
        "ratings": [6, 6, 5, 7, 6, 6], "content_errors": "", "remarks": ""
    });
    let (s, stored) = json_call(&app, "POST", "/survey-responses", Some(response)).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(stored["revision"], 1);

    let (s, report) = json_call(&app, "GET", "/reports/aggregate", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(report["total_questions"], 1);
    let (s, csv) = call(&app, "GET", "/reports/aggregate?format=csv", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(csv).unwrap().lines().count() > 1);
}

#[tokio::test]
async fn error_statuses() {
    let tmp = tempfile::tempdir().unwrap();
    let app = Arc::new(replay_app(tmp.path(), "arc-consistency-session"));
    let request = serde_json::to_value(request()).unwrap();

    let (s, body) = json_call(&app, "GET", "/drafts/nope", None).await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::NOT_FOUND, Some("unknown_draft"))
    );
    let (s, body) = json_call(&app, "GET", "/corpora/nope/symbols", None).await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::NOT_FOUND, Some("unknown_corpus"))
    );

    let mut bad = request.clone();
    bad["concepts"] = json!(["ai/csp/arc-consistency?arc-consistency?nope"]);
    let (s, body) = json_call(&app, "POST", "/generate", Some(bad)).await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("unknown_symbol"))
    );

    let (s, _) = call(&app, "POST", "/generate", Some(json!({"nonsense": true}))).await;
    assert!(s.is_client_error());

    let mut other = request.clone();
    other["n_questions"] = json!(4);
    let (s, body) = json_call(&app, "POST", "/generate", Some(other)).await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::BAD_GATEWAY, Some("replay_miss"))
    );

    let (_, generated) = json_call(&app, "POST", "/generate", Some(request)).await;
    let fib = generated["drafts"][2]["id"].as_str().unwrap().to_owned();
    let edit = json!({
        "status": "Edited",
        "edited_source": "\\begin{sproblem}\\usemodule[ai]{csp?arc-consistency}\\objective{remember}{ac-3} How many? \\fillinsol{\\sn{ac-3}}\\end{sproblem}"
    });
    let (s, body) = json_call(
        &app,
        "POST",
        &format!("/drafts/{}/review", enc(&fib)),
        Some(edit),
    )
    .await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("edit_rejected"))
    );
    assert_eq!(body["report"]["verdict"], "Fail");

    let (s, body) = json_call(
        &app,
        "POST",
        &format!("/drafts/{}/grade", enc(&fib)),
        Some(json!({"selected": [0]})),
    )
    .await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("grade_error"))
    );

    let response = json!({
        "question_id": fib, "expert_id": "e1", "difficulty": 9,
        "ratings": [6, 6, 5, 7, 6, 6], "content_errors": "", "remarks": ""
    });
    let (s, body) = json_call(&app, "POST", "/survey-responses", Some(response)).await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("survey_error"))
    );
}

#[tokio::test]
async fn no_corpus_is_a_conflict() {
    let tmp = tempfile::tempdir().unwrap();
    let store = stexquiz_app::store::Store::open(tmp.path(), fixed_clock()).unwrap();
    let app = Arc::new(
        stexquiz_app::App::open(
            store,
            Arc::new(stexquiz_gateway::ScriptedBackend::new([])),
            Default::default(),
            Default::default(),
        )
        .unwrap(),
    );
    let (s, body) = json_call(
        &app,
        "POST",
        "/generate",
        Some(serde_json::to_value(request()).unwrap()),
    )
    .await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::CONFLICT, Some("no_corpus"))
    );

    let manifest = manifest().display().to_string();
    let (s, summary) = json_call(
        &app,
        "POST",
        "/corpora",
        Some(json!({ "manifest": manifest })),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(summary["top_level_sections"].as_array().unwrap().len(), 6);
    let (s, body) = json_call(
        &app,
        "POST",
        "/corpora",
        Some(json!({ "manifest": "/nonexistent/m.txt" })),
    )
    .await;
    assert_eq!(
        (s, body["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("ingest_failed"))
    );
}
