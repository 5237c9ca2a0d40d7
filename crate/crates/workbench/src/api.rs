//! HTTP/JSON routes over a [`Store`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use hypercex_core::checker::DEFAULT_BOUND;
use serde::Deserialize;
use serde_json::json;

use crate::store::{Store, StoreError};

pub struct ApiError {
    status: StatusCode,
    error: String,
    detail: String,
}

impl ApiError {
    fn bad_request(detail: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, error: "BadRequest".into(), detail: detail.into() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let detail = e.to_string();
        let (status, error) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound".to_string()),
            StoreError::Busy(_) => (StatusCode::CONFLICT, "Busy".to_string()),
            StoreError::Pipeline(p) => (StatusCode::UNPROCESSABLE_ENTITY, p.kind().to_string()),
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "StorageError".to_string())
            }
        };
        ApiError { status, error, detail }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "detail": self.detail }))).into_response()
    }
}

type Shared = Arc<Store>;
type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct NewProject {
    name: String,
    machine_source: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct NewCheck {
    #[serde(default)]
    name: Option<String>,
    formula_text: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct FormulaEdit {
    formula_text: String,
}

#[derive(Deserialize)]
struct TagBody {
    tag: String,
}

#[derive(Deserialize)]
struct RunParams {
    bound: Option<usize>,
}

async fn list_projects(State(store): State<Shared>) -> impl IntoResponse {
    Json(store.list_projects())
}

async fn create_project(
    State(store): State<Shared>,
    body: Result<Json<NewProject>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let project = blocking(move || store.create_project(&body.name, &body.machine_source)).await?;
    Ok((StatusCode::CREATED, Json(project)).into_response())
}

async fn list_versions(State(store): State<Shared>, Path(pid): Path<String>) -> ApiResult<Response> {
    Ok(Json(store.versions(&pid)?).into_response())
}

async fn add_check(
    State(store): State<Shared>,
    Path((pid, vid)): Path<(String, String)>,
    body: Result<Json<NewCheck>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let check = blocking(move || store.add_check(&pid, &vid, body.name.as_deref(), &body.formula_text)).await?;
    Ok((StatusCode::CREATED, Json(check)).into_response())
}

async fn get_check(State(store): State<Shared>, Path(cid): Path<String>) -> ApiResult<Response> {
    Ok(Json(store.check(&cid)?).into_response())
}

async fn run_check(
    State(store): State<Shared>,
    Path(cid): Path<String>,
    Query(params): Query<RunParams>,
) -> ApiResult<Response> {
    let bound = params.bound.unwrap_or(DEFAULT_BOUND);
    let check = blocking(move || store.run_check(&cid, bound)).await?;
    Ok(Json(check).into_response())
}

async fn get_bundle(State(store): State<Shared>, Path(cid): Path<String>) -> ApiResult<Response> {
    let bytes = store.bundle(&cid)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn edit_formula(
    State(store): State<Shared>,
    Path(cid): Path<String>,
    body: Result<Json<FormulaEdit>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let version = blocking(move || store.edit_formula(&cid, &body.formula_text)).await?;
    Ok((StatusCode::CREATED, Json(version)).into_response())
}

async fn tag_version(
    State(store): State<Shared>,
    Path(vid): Path<String>,
    body: Result<Json<TagBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let version = blocking(move || store.tag_version(&vid, &body.tag)).await?;
    Ok(Json(version).into_response())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => {
            Err(ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, error: "Internal".into(), detail: e.to_string() })
        }
    }
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{p}/versions", get(list_versions))
        .route("/projects/{p}/versions/{v}/checks", post(add_check))
        .route("/checks/{c}", get(get_check))
        .route("/checks/{c}/run", post(run_check))
        .route("/checks/{c}/bundle", get(get_bundle))
        .route("/checks/{c}/formula", put(edit_formula))
        .route("/versions/{v}/tag", post(tag_version))
        .with_state(store)
}
