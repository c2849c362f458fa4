//! JSON-over-HTTP API.
//!
//! | method | path                       | body / query          |
//! |--------|----------------------------|-----------------------|
//! | GET    | `/homes`                   |                       |
//! | GET    | `/risk/{home}/{date}`      |                       |
//! | GET    | `/alerts`                  | `?status=pending`     |
//! | POST   | `/alerts/{id}/validate`    | `{"outcome": "positive"}` |
//! | POST   | `/ingest`                  | event JSON lines      |
//! | GET    | `/model`                   |                       |
//!
//! Errors are `{"error": <code>, "message": <text>}` with a matching status.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Deserialize;
use serde_json::json;
use utirisk_core::data::parse_events_jsonl;

use crate::alerts::{AlertError, AlertStatus, Outcome};
use crate::state::{Service, ServiceError};

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/homes", get(homes))
        .route("/risk/{home}/{date}", get(risk))
        .route("/alerts", get(alerts))
        .route("/alerts/{id}/validate", post(validate))
        .route("/ingest", post(ingest))
        .route("/model", get(model))
        .with_state(service)
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, code) = match &e {
            ServiceError::Alert(AlertError::Unknown(_)) => (StatusCode::NOT_FOUND, "unknown_alert"),
            ServiceError::Alert(AlertError::AlreadyValidated { .. }) => (StatusCode::CONFLICT, "already_validated"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::Model(
                utirisk_core::Error::DimensionMismatch { .. }
                | utirisk_core::Error::UnknownNode(_)
                | utirisk_core::Error::MixedHomes { .. }
                | utirisk_core::Error::MissingChannel(_),
            ) => (StatusCode::UNPROCESSABLE_ENTITY, "malformed_input"),
            ServiceError::Model(_) => (StatusCode::INTERNAL_SERVER_ERROR, "model_error"),
            ServiceError::Snapshot(_) | ServiceError::Audit { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "persistence_error")
            }
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn homes(State(s): State<Arc<Service>>) -> ApiResult<serde_json::Value> {
    Ok(Json(json!({ "homes": s.homes()? })))
}

async fn risk(State(s): State<Arc<Service>>, Path((home, date)): Path<(String, String)>) -> ApiResult<serde_json::Value> {
    let date: NaiveDate = date
        .parse()
        .map_err(|_| ApiError::bad_request(format!("`{date}` is not a YYYY-MM-DD date")))?;
    Ok(Json(serde_json::to_value(s.risk(&home, date)?).expect("risk view serializes")))
}

#[derive(Deserialize)]
struct AlertQuery {
    status: Option<String>,
}

async fn alerts(State(s): State<Arc<Service>>, Query(q): Query<AlertQuery>) -> ApiResult<serde_json::Value> {
    let status = q
        .status
        .map(|v| v.parse::<AlertStatus>())
        .transpose()
        .map_err(ApiError::bad_request)?;
    Ok(Json(json!({ "alerts": s.alerts(status) })))
}

#[derive(Deserialize)]
struct ValidateBody {
    outcome: Outcome,
}

async fn validate(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Result<Json<ValidateBody>, JsonRejection>,
) -> ApiResult<serde_json::Value> {
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError::bad_request(format!("`{id}` is not an alert id")))?;
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let v = tokio::task::spawn_blocking(move || s.validate_alert(id, body.outcome))
        .await
        .expect("validation task")?;
    Ok(Json(serde_json::to_value(v).expect("validation serializes")))
}

async fn ingest(State(s): State<Arc<Service>>, body: String) -> ApiResult<serde_json::Value> {
    let report = parse_events_jsonl(&body);
    if report.records.is_empty() && !report.rejections.is_empty() {
        return Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "malformed_input",
            message: format!("no valid events; first problem on line {}: {}", report.rejections[0].line, report.rejections[0].reason),
        });
    }
    let summary = tokio::task::spawn_blocking(move || s.ingest(report.records, report.rejections))
        .await
        .expect("ingest task")?;
    Ok(Json(serde_json::to_value(summary).expect("summary serializes")))
}

async fn model(State(s): State<Arc<Service>>) -> Json<serde_json::Value> {
    Json(serde_json::to_value(s.model_info()).expect("model info serializes"))
}
