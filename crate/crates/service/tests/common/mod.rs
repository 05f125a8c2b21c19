#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use bronchial_dx_service::engine::bootstrap_memory;
use bronchial_dx_service::{router, AppState, CaseStore, Engine};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const FIXTURE: &str = include_str!("../../fixtures/asthmatic_payload.json");

pub fn state_in(dir: &Path, snapshot_every: u64) -> Arc<AppState> {
    let engine = Engine::default();
    let enc = engine.encoder.clone();
    let store = CaseStore::open(dir, || bootstrap_memory(&enc), snapshot_every).unwrap();
    Arc::new(AppState { engine, store, data_dir: Some(dir.to_path_buf()) })
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    call_raw(app, method, uri, body.map(|b| b.to_string())).await
}

pub async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub fn app_in(dir: &Path) -> Router {
    router(state_in(dir, 0))
}

/// Every core answer set to `v`.
pub fn core_answers(v: u8) -> Value {
    let map: serde_json::Map<String, Value> = ('A'..='X').map(|c| (c.to_string(), json!(v))).collect();
    Value::Object(map)
}

pub fn fixture() -> Value {
    serde_json::from_str(FIXTURE).unwrap()
}

use bronchial_dx::encoder::{Encoder, PatientInput};
use bronchial_dx::questionnaire::ResponseSet;
use bronchial_dx_service::payload::DiagnoseRequest;
use rand::Rng;
use std::collections::BTreeMap;

/// Random core answers (yes with probability `p`) and, half the time,
/// random professional answers.
pub fn random_input(rng: &mut impl Rng, enc: &Encoder, p: f64) -> PatientInput {
    let draw = |rng: &mut dyn rand::RngCore, def: &bronchial_dx::questionnaire::QuestionnaireDefinition| {
        let answers: BTreeMap<String, i64> =
            def.questions().map(|q| (q.id.clone(), i64::from(rng.random_bool(p)))).collect();
        ResponseSet::new(def, &answers).unwrap()
    };
    let core = draw(rng, &enc.core);
    let professional = rng.random_bool(0.5).then(|| draw(rng, &enc.professional));
    PatientInput { core, professional, report: None, imaging: None }
}

pub fn cdamm_request(input: PatientInput) -> DiagnoseRequest {
    DiagnoseRequest { input, algo: bronchial_dx::evaluate::Algo::Cdamm }
}
