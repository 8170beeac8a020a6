//! HTTP routes over the session store.
//!
//! Bodies are read with the configured size limit and parsed by hand so
//! every failure, including malformed JSON and oversized uploads, comes back
//! as the same `{error, message, hint}` document. Image work runs on the
//! blocking pool.

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use http_body_util::{BodyExt, LengthLimitError, Limited};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use objrestore::compose::{EnhanceSettings, ExportFormat, Project};
use objrestore::restore::Task;
use objrestore::segment::ExternalSegmenter;
use objrestore::Error;

use crate::config::Config;
use crate::error::{ServiceError, ServiceResult};
use crate::ops::{self, PreviewResponse, RestoreRequestBody, SegmentRequest};
use crate::session::SessionStore;

/// JSON bodies other than uploads are capped here.
const JSON_LIMIT: usize = 1 << 20;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<Config>,
    external: Option<ExternalSegmenter>,
}

impl AppState {
    pub fn new(store: SessionStore, config: Config) -> Self {
        let external = config.external();
        AppState {
            store: Arc::new(store),
            config: Arc::new(config),
            external,
        }
    }
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.public_message(),
            hint: self.hint().map(str::to_string),
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/segment", post(segment))
        .route("/sessions/{id}/layers/{lid}/estimate", post(estimate))
        .route("/sessions/{id}/layers/{lid}/restore", post(restore))
        .route("/sessions/{id}/layers/{lid}/enhance", post(enhance))
        .route("/sessions/{id}/composite", get(composite))
        .route("/sessions/{id}/export", post(export))
        .route("/sessions/{id}/project", get(get_project).put(put_project))
        // Limits are enforced per handler.
        .layer(DefaultBodyLimit::disable())
        .with_state(state)
}

async fn read_body(headers: &HeaderMap, body: Body, limit: usize) -> ServiceResult<Bytes> {
    let declared = headers
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok());
    if declared.is_some_and(|n| n > limit as u64) {
        return Err(ServiceError::TooLarge { limit });
    }
    match Limited::new(body, limit).collect().await {
        Ok(collected) => Ok(collected.to_bytes()),
        Err(e) if e.downcast_ref::<LengthLimitError>().is_some() => {
            Err(ServiceError::TooLarge { limit })
        }
        Err(e) => Err(Error::InvalidArgument(format!("could not read request body: {e}")).into()),
    }
}

async fn read_json<T: DeserializeOwned>(headers: &HeaderMap, body: Body) -> ServiceResult<T> {
    let bytes = read_body(headers, body, JSON_LIMIT).await?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::InvalidArgument(format!("invalid JSON body: {e}")).into())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ServiceResult<T> + Send + 'static,
) -> ServiceResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

fn bytes_response(media_type: &'static str, bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, media_type)], bytes).into_response()
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(
    State(st): State<AppState>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let limit = st.config.upload_limit;
    let bytes = read_body(&headers, body, limit).await?;
    let info = blocking(move || {
        let project = ops::create_project(&bytes, limit)?;
        st.store.create(project)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn get_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Response> {
    let info = st.store.read(&id, |s| Ok(s.info()))?;
    Ok(Json(info).into_response())
}

async fn delete_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<StatusCode> {
    blocking(move || st.store.delete(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn segment(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let req: SegmentRequest = read_json(&headers, body).await?;
    let out = blocking(move || {
        st.store.mutate(&id, |s| {
            ops::segment_layer(&mut s.project, &req, st.external.as_ref())
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

#[derive(Deserialize)]
struct EstimateBody {
    task: Task,
}

async fn estimate(
    State(st): State<AppState>,
    Path((id, lid)): Path<(String, String)>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let req: EstimateBody = read_json(&headers, body).await?;
    let out = blocking(move || {
        st.store
            .mutate(&id, |s| ops::estimate_layer(&mut s.project, &lid, req.task))
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn restore(
    State(st): State<AppState>,
    Path((id, lid)): Path<(String, String)>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let req: RestoreRequestBody = read_json(&headers, body).await?;
    if !req.preview {
        let out = blocking(move || {
            st.store.mutate(&id, |s| {
                let layer = s
                    .project
                    .layer(&lid)
                    .ok_or_else(|| ServiceError::NotFound(format!("layer {lid}")))?;
                let resolved = ops::resolve_restore(layer, &req)?;
                // A commit makes any in-flight preview of this layer stale.
                s.begin_preview(&lid);
                ops::commit_restore(&mut s.project, &lid, resolved)
            })
        })
        .await?;
        return Ok(Json(out).into_response());
    }
    // Previews render outside the session lock from a snapshot.
    let (source, layer, resolved, ticket) = st.store.read(&id, |s| {
        let layer = s
            .project
            .layer(&lid)
            .ok_or_else(|| ServiceError::NotFound(format!("layer {lid}")))?
            .clone();
        let resolved = ops::resolve_restore(&layer, &req)?;
        let ticket = s.begin_preview(&lid);
        Ok((s.project.source().clone(), layer, resolved, ticket))
    })?;
    let config = st.config.clone();
    let out = blocking(move || {
        let variants = ops::render_previews(
            &source,
            &layer,
            &resolved,
            &config.preview_factors,
            config.preview_max_dim,
            &|| ticket.is_current(),
        )?;
        Ok(PreviewResponse {
            layer_id: lid,
            task: resolved.task,
            param: resolved.param,
            variants,
        })
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn enhance(
    State(st): State<AppState>,
    Path((id, lid)): Path<(String, String)>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let settings: EnhanceSettings = read_json(&headers, body).await?;
    let out = blocking(move || {
        st.store
            .mutate(&id, |s| ops::enhance_layer(&mut s.project, &lid, settings))
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn composite(State(st): State<AppState>, Path(id): Path<String>) -> ServiceResult<Response> {
    let png = blocking(move || st.store.read(&id, |s| ops::composite_png(&mut s.project))).await?;
    Ok(bytes_response("image/png", png))
}

async fn export(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let format: ExportFormat = read_json(&headers, body).await?;
    let bytes =
        blocking(move || st.store.read(&id, |s| ops::export(&mut s.project, format))).await?;
    Ok(bytes_response(format.media_type(), bytes))
}

async fn get_project(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Response> {
    let zip = blocking(move || st.store.read(&id, |s| Ok(s.project.to_zip()?))).await?;
    Ok(bytes_response("application/zip", zip))
}

async fn put_project(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Body,
) -> ServiceResult<Response> {
    let bytes = read_body(&headers, body, st.config.upload_limit).await?;
    let info = blocking(move || {
        st.store.get(&id)?;
        let project = Project::from_zip(&bytes)?;
        st.store.mutate(&id, |s| {
            s.project = project;
            Ok(())
        })?;
        st.store.read(&id, |s| Ok(s.info()))
    })
    .await?;
    Ok(Json(info).into_response())
}

/// Binds and serves until ctrl-c.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let store = match &config.storage_dir {
        Some(dir) => SessionStore::open(dir).map_err(|e| std::io::Error::other(e.to_string()))?,
        None => SessionStore::in_memory(),
    };
    tracing::info!(sessions = store.len(), "session store ready");
    let addr = config.bind_addr();
    let app = router(AppState::new(store, config));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
