//! JSON API over [`App`]. Handlers run on the blocking pool since the
//! store and the gateway are synchronous.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use stexquiz_core::prompt::GenerationRequest;
use stexquiz_core::question::{ReviewStatus, StudentResponse};
use stexquiz_core::survey::ExpertResponse;
use stexquiz_gateway::GatewayError;

use crate::service::{App, AppError, DraftView, PipelineReject, ReviewAction};

pub struct ApiError(AppError);

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, kind, extra) = match &self.0 {
            AppError::UnknownCorpus(_) => (StatusCode::NOT_FOUND, "unknown_corpus", json!(null)),
            AppError::NoCorpus => (StatusCode::CONFLICT, "no_corpus", json!(null)),
            AppError::UnknownDraft(_) => (StatusCode::NOT_FOUND, "unknown_draft", json!(null)),
            AppError::UnknownSymbol(_) => (StatusCode::BAD_REQUEST, "unknown_symbol", json!(null)),
            AppError::EditRejected(report) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "edit_rejected",
                json!(report),
            ),
            AppError::EmptyOutput { rejects, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "empty_output",
                json!(rejects),
            ),
            AppError::InvalidRequest(_) => {
                (StatusCode::BAD_REQUEST, "invalid_request", json!(null))
            }
            AppError::Ingest(_) => (StatusCode::BAD_REQUEST, "ingest_failed", json!(null)),
            AppError::Gateway(GatewayError::ReplayMiss(_)) => {
                (StatusCode::BAD_GATEWAY, "replay_miss", json!(null))
            }
            AppError::Gateway(GatewayError::ProviderRefusal(_)) => {
                (StatusCode::BAD_GATEWAY, "provider_refusal", json!(null))
            }
            AppError::Gateway(e) if e.is_retryable() => (
                StatusCode::SERVICE_UNAVAILABLE,
                "transport_failure",
                json!(null),
            ),
            AppError::Gateway(GatewayError::Prompt(_)) => {
                (StatusCode::BAD_REQUEST, "invalid_request", json!(null))
            }
            AppError::Gateway(_) => (StatusCode::BAD_GATEWAY, "gateway_error", json!(null)),
            AppError::Grade(_) => (StatusCode::BAD_REQUEST, "grade_error", json!(null)),
            AppError::Survey(_) => (StatusCode::BAD_REQUEST, "survey_error", json!(null)),
            AppError::Store(_) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                "store_error",
                json!(null),
            ),
        };
        let mut body = json!({ "error": kind, "message": message });
        if !extra.is_null() {
            let key = if matches!(self.0, AppError::EditRejected(_)) {
                "report"
            } else {
                "rejects"
            };
            body[key] = extra;
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(app: Arc<App>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&App) -> Result<T, AppError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .expect("handler task panicked")
        .map_err(ApiError)
}

#[derive(Deserialize)]
struct IngestBody {
    manifest: PathBuf,
}

#[derive(Deserialize)]
struct SymbolQuery {
    #[serde(default)]
    query: String,
}

#[derive(Deserialize)]
struct CorpusQuery {
    corpus: Option<String>,
}

#[derive(Deserialize)]
struct StatusQuery {
    status: Option<ReviewStatus>,
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

#[derive(Serialize)]
struct GenerateResponse {
    transcript_ref: String,
    drafts: Vec<DraftView>,
    rejects: Vec<PipelineReject>,
}

#[derive(Serialize)]
struct Stored {
    id: String,
    revision: u64,
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/corpora", post(ingest).get(corpora))
        .route("/corpora/{id}/symbols", get(symbols))
        .route("/generate", post(generate))
        .route("/drafts", get(list_drafts))
        .route("/drafts/{id}", get(draft))
        .route("/drafts/{id}/student", get(student))
        .route("/drafts/{id}/transcript", get(transcript))
        .route("/drafts/{id}/review", post(review))
        .route("/drafts/{id}/grade", post(grade))
        .route("/drafts/{id}/survey", get(survey))
        .route("/survey-responses", post(survey_response))
        .route("/reports/aggregate", get(aggregate))
        .with_state(app)
}

async fn ingest(
    State(app): State<Arc<App>>,
    Json(body): Json<IngestBody>,
) -> ApiResult<impl IntoResponse> {
    let summary = blocking(app, move |a| a.ingest_corpus(&body.manifest)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn corpora(State(app): State<Arc<App>>) -> Json<Vec<String>> {
    Json(app.corpus_ids())
}

async fn symbols(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(q): Query<SymbolQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(app, move |a| a.symbols(Some(&id), &q.query)).await?,
    ))
}

async fn generate(
    State(app): State<Arc<App>>,
    Query(q): Query<CorpusQuery>,
    Json(request): Json<GenerationRequest>,
) -> ApiResult<impl IntoResponse> {
    let response = blocking(app, move |a| {
        let result = a.generate(&request, q.corpus.as_deref())?;
        let drafts = result
            .drafts
            .iter()
            .map(|d| a.draft_view(&d.question.id))
            .collect::<Result<_, _>>()?;
        Ok(GenerateResponse {
            transcript_ref: result.transcript_ref,
            drafts,
            rejects: result.rejects,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(response)))
}

async fn list_drafts(
    State(app): State<Arc<App>>,
    Query(q): Query<StatusQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(app, move |a| a.list_drafts(q.status)).await?))
}

async fn draft(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(app, move |a| a.draft_view(&id)).await?))
}

async fn student(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(app, move |a| a.student_view(&id)).await?))
}

async fn transcript(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(app, move |a| {
            let draft = a.draft(&id)?.payload;
            a.transcript(&draft.transcript_ref)?.ok_or_else(|| {
                AppError::InvalidRequest(format!("transcript {} is missing", draft.transcript_ref))
            })
        })
        .await?,
    ))
}

async fn review(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Json(action): Json<ReviewAction>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(app, move |a| {
            a.set_review_status(&id, &action)?;
            a.draft_view(&id)
        })
        .await?,
    ))
}

async fn grade(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Json(response): Json<StudentResponse>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(app, move |a| a.grade(&id, &response)).await?))
}

async fn survey(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(app, move |a| a.survey_instrument(&id)).await?,
    ))
}

async fn survey_response(
    State(app): State<Arc<App>>,
    Json(response): Json<ExpertResponse>,
) -> ApiResult<impl IntoResponse> {
    let record = blocking(app, move |a| a.submit_response(&response)).await?;
    Ok((
        StatusCode::CREATED,
        Json(Stored {
            id: record.id,
            revision: record.revision,
        }),
    ))
}

async fn aggregate(
    State(app): State<Arc<App>>,
    Query(q): Query<FormatQuery>,
) -> ApiResult<Response> {
    let report = blocking(app, |a| a.aggregate_report()).await?;
    Ok(match q.format.as_deref() {
        Some("csv") => ([(header::CONTENT_TYPE, "text/csv")], report.to_csv()).into_response(),
        _ => Json(report).into_response(),
    })
}
