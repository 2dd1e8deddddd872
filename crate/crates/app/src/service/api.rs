use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use super::error::ApiError;
use super::session::{CatalogEntry, ModelInfo, RoundView, Session, SessionStore};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub requirements: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectRequest {
    pub service_id: String,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(req: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    req.map(|Json(v)| v).map_err(|e| ApiError::validation(e.body_text()))
}

async fn create(State(store): State<Arc<SessionStore>>, req: Result<Json<CreateRequest>, JsonRejection>) -> ApiResult<RoundView> {
    let req = body(req)?;
    store.create(&req.requirements, &req.tags).map(Json)
}

async fn select(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    req: Result<Json<SelectRequest>, JsonRejection>,
) -> ApiResult<RoundView> {
    let req = body(req)?;
    store.select(&id, &req.service_id).map(Json)
}

async fn undo(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<RoundView> {
    store.undo(&id).map(Json)
}

async fn session(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Session> {
    store.get(&id).map(Json)
}

async fn services(State(store): State<Arc<SessionStore>>) -> ApiResult<Vec<CatalogEntry>> {
    store.catalog().map(Json)
}

async fn model(State(store): State<Arc<SessionStore>>) -> ApiResult<ModelInfo> {
    store.model_info().map(Json)
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such route")
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/select", post(select))
        .route("/sessions/{id}/undo", post(undo))
        .route("/services", get(services))
        .route("/model", get(model))
        .fallback(fallback)
        .with_state(store)
}
