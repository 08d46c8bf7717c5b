use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;

use crate::session::{ParamsUpdate, Session, TileRange};
use crate::ServiceError;

type AppState = Arc<Session>;

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/api/metadata", get(metadata))
        .route("/api/tile/{z}/{tx}/{ty}", get(tile))
        .route("/api/params", get(params).post(set_params))
        .route("/api/histogram", get(histogram))
        .route("/api/export", post(start_export))
        .route("/api/export/{id}", get(export_status))
        .route("/api/events", get(events))
        .with_state(session)
}

/// Serves until the process is stopped.
pub async fn serve(session: Arc<Session>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(session)).await
}

async fn metadata(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.metadata())
}

async fn params(State(s): State<AppState>) -> impl IntoResponse {
    let snap = s.snapshot();
    Json(serde_json::json!({ "generation": snap.generation, "params": snap.params, "stretch": snap.stretch }))
}

async fn set_params(State(s): State<AppState>, Json(update): Json<ParamsUpdate>) -> Result<Response, ServiceError> {
    let accepted = tokio::task::spawn_blocking(move || s.set_params(update))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(accepted).into_response())
}

#[derive(Debug, Deserialize)]
struct TileQuery {
    gen: Option<u64>,
}

async fn tile(
    State(s): State<AppState>,
    Path((z, tx, ty)): Path<(u32, i64, i64)>,
    Query(q): Query<TileQuery>,
) -> Result<Response, ServiceError> {
    let (generation, t) = s.tile_async(z, tx, ty, q.gen).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/png".to_string()),
            (header::HeaderName::from_static("x-coverage"), t.coverage_header()),
            (header::HeaderName::from_static("x-generation"), generation.to_string()),
        ],
        t.png.clone(),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct HistogramQuery {
    viewport: String,
    apply: Option<bool>,
}

async fn histogram(State(s): State<AppState>, Query(q): Query<HistogramQuery>) -> Result<Response, ServiceError> {
    let range: TileRange = q.viewport.parse().map_err(ServiceError::BadRequest)?;
    let apply = q.apply.unwrap_or(true);
    let h = tokio::task::spawn_blocking(move || s.histogram(range, apply))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(h).into_response())
}

async fn start_export(State(s): State<AppState>, Json(body): Json<serde_json::Value>) -> Result<Response, ServiceError> {
    let id = tokio::task::spawn_blocking(move || s.start_export(body))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(serde_json::json!({ "id": id })).into_response())
}

async fn export_status(State(s): State<AppState>, Path(id): Path<u64>) -> Result<Response, ServiceError> {
    s.job(id)
        .map(|j| Json(j).into_response())
        .ok_or_else(|| ServiceError::NotFound(format!("no export job {id}")))
}

async fn events(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let rx = s.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let e = SseEvent::default()
                        .event(ev.kind())
                        .data(serde_json::to_string(&ev).expect("event serializes"));
                    return Some((Ok(e), rx));
                }
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}
