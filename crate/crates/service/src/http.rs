//! HTTP/JSON front end. Every error is a problem document
//! (`application/problem+json`) carrying a machine-readable `code`.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::service::Service;

#[derive(Debug, Serialize, Deserialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub status: u16,
    pub detail: String,
    pub code: String,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    title: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, title: &'static str, detail: String) -> Self {
        ApiError {
            status,
            code,
            title,
            detail,
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let title = status.canonical_reason().unwrap_or("Error");
        if status.is_server_error() {
            log::error!("{e}");
        }
        ApiError::new(status, e.code(), title, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "malformed_request",
            "Bad Request",
            e.body_text(),
        )
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "malformed_path",
            "Bad Request",
            e.body_text(),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Problem {
            kind: format!("urn:sp:problem:{}", self.code),
            title: self.title.to_owned(),
            status: self.status.as_u16(),
            detail: self.detail,
            code: self.code.to_owned(),
        };
        let bytes = serde_json::to_vec(&body).unwrap_or_default();
        (
            self.status,
            [(header::CONTENT_TYPE, "application/problem+json")],
            bytes,
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs service work off the async threads; searches can take seconds.
async fn blocking<T, F>(svc: &Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    let svc = svc.clone();
    match tokio::task::spawn_blocking(move || f(&svc)).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "Internal Server Error",
            e.to_string(),
        )),
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub kb_id: String,
}

#[derive(Debug, Deserialize)]
pub struct AddFindings {
    /// Blank-line separated finding patterns.
    pub text: String,
}

#[derive(Debug, Serialize)]
struct KbDocument {
    #[serde(flatten)]
    summary: crate::service::KbSummary,
    text: String,
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/kb", post(upload_kb).get(list_kbs))
        .route("/kb/{id}", get(get_kb))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/findings", post(add_findings))
        .route("/sessions/{id}/revisions", get(revisions))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/alignments/{k}", get(alignment))
        .fallback(|| async {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "route_not_found",
                "Not Found",
                "no such route".into(),
            )
        })
        .with_state(svc)
}

async fn upload_kb(State(svc): State<Arc<Service>>, body: String) -> ApiResult<impl IntoResponse> {
    let summary = blocking(&svc, move |s| s.add_kb(body)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_kbs(State(svc): State<Arc<Service>>) -> impl IntoResponse {
    Json(svc.list_kbs())
}

async fn get_kb(
    State(svc): State<Arc<Service>>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path(id) = id?;
    Ok(Json(KbDocument {
        summary: svc.kb_summary(&id)?,
        text: svc.kb_text(&id)?,
    }))
}

async fn create_session(
    State(svc): State<Arc<Service>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body?;
    let summary = blocking(&svc, move |s| s.create_session(&req.kb_id)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_sessions(State(svc): State<Arc<Service>>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(&svc, |s| Ok(s.list_sessions())).await?))
}

async fn get_session(
    State(svc): State<Arc<Service>>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path(id) = id?;
    Ok(Json(blocking(&svc, move |s| s.session(&id)).await?))
}

async fn delete_session(
    State(svc): State<Arc<Service>>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path(id) = id?;
    blocking(&svc, move |s| s.delete_session(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn add_findings(
    State(svc): State<Arc<Service>>,
    id: Result<Path<String>, PathRejection>,
    body: Result<Json<AddFindings>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path(id) = id?;
    let Json(req) = body?;
    Ok(Json(
        blocking(&svc, move |s| s.add_findings(&id, &req.text)).await?,
    ))
}

async fn revisions(
    State(svc): State<Arc<Service>>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path(id) = id?;
    Ok(Json(blocking(&svc, move |s| s.revisions(&id)).await?))
}

async fn report(
    State(svc): State<Arc<Service>>,
    id: Result<Path<String>, PathRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path(id) = id?;
    Ok(Json(blocking(&svc, move |s| s.report(&id)).await?))
}

async fn alignment(
    State(svc): State<Arc<Service>>,
    path: Result<Path<(String, usize)>, PathRejection>,
) -> ApiResult<impl IntoResponse> {
    let Path((id, k)) = path?;
    Ok(Json(blocking(&svc, move |s| s.alignment(&id, k)).await?))
}
