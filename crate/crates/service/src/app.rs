use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use bronchial_dx::encoder::LAYOUT_VERSION;
use bronchial_dx::evaluate::EvalReport;
use serde::Serialize;
use serde_json::Value;

use crate::engine::{run_evaluation, Engine, Outcome};
use crate::error::{ServiceError, ServiceResult};
use crate::payload::{parse_diagnose, EvaluateRequest, FeedbackRequest};
use crate::store::{CaseRecord, CaseStore, FeedbackAck};

/// Uploaded CT slices are sent inline as base64.
const BODY_LIMIT: usize = 16 * 1024 * 1024;

pub struct AppState {
    pub engine: Engine,
    pub store: CaseStore,
    /// Root for dataset paths named in evaluation requests.
    pub data_dir: Option<PathBuf>,
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/questionnaire", get(core_questionnaire))
        .route("/api/questionnaire/professional", get(professional_questionnaire))
        .route("/api/diagnose", post(diagnose))
        .route("/api/cases/{id}", get(get_case))
        .route("/api/cases/{id}/feedback", post(feedback))
        .route("/api/evaluate", post(evaluate))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

fn json_body(bytes: &Bytes) -> ServiceResult<Value> {
    if bytes.is_empty() {
        return Err(ServiceError::BadRequest("request body is empty".into()));
    }
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(format!("malformed JSON: {e}")))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    memory_version: u64,
    cases: usize,
    layout_version: u32,
    diseases: Vec<String>,
    models: Vec<String>,
}

async fn health(State(s): State<SharedState>) -> ServiceResult<Json<Health>> {
    Ok(Json(Health {
        status: "ok",
        memory_version: s.store.memory_version(),
        cases: s.store.case_count(),
        layout_version: LAYOUT_VERSION,
        diseases: s.store.diseases()?,
        models: s.engine.models.keys().cloned().collect(),
    }))
}

async fn core_questionnaire(State(s): State<SharedState>) -> Json<Value> {
    Json(serde_json::to_value(&s.engine.encoder.core).unwrap_or(Value::Null))
}

async fn professional_questionnaire(State(s): State<SharedState>) -> Json<Value> {
    Json(serde_json::to_value(&s.engine.encoder.professional).unwrap_or(Value::Null))
}

#[derive(Debug, Serialize)]
pub struct DiagnoseResponse {
    pub case_id: String,
    pub case_url: String,
    pub memory_version: u64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

async fn diagnose(State(s): State<SharedState>, body: Bytes) -> ServiceResult<(StatusCode, Json<DiagnoseResponse>)> {
    let value = json_body(&body)?;
    let req = parse_diagnose(&value, &s.engine.encoder, &s.engine.imaging)?;
    let rec = s.store.diagnose(&s.engine, req)?;
    Ok((
        StatusCode::CREATED,
        Json(DiagnoseResponse {
            case_url: format!("/api/cases/{}", rec.id),
            case_id: rec.id,
            memory_version: rec.memory_version,
            outcome: rec.diagnosis,
        }),
    ))
}

async fn get_case(State(s): State<SharedState>, Path(id): Path<String>) -> ServiceResult<Json<CaseRecord>> {
    Ok(Json(s.store.case(&id)?))
}

async fn feedback(
    State(s): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ServiceResult<Json<FeedbackAck>> {
    let value = json_body(&body)?;
    // Unknown case wins over a bad body.
    s.store.case(&id)?;
    let req = FeedbackRequest::parse(&value, &s.store.diseases()?)?;
    Ok(Json(s.store.feedback(&s.engine, &id, req)?))
}

async fn evaluate(State(s): State<SharedState>, body: Bytes) -> ServiceResult<Json<EvalReport>> {
    let req = EvaluateRequest::parse(&json_body(&body)?)?;
    let state = s.clone();
    let report =
        tokio::task::spawn_blocking(move || run_evaluation(&req, &state.engine.encoder, state.data_dir.as_deref()))
            .await
            .map_err(|e| ServiceError::Internal(format!("evaluation task failed: {e}")))??;
    Ok(Json(report))
}
