//! HTTP backend for the swathcube viewer.
//!
//! Tiles are rendered on demand from whatever band data is already in
//! memory; missing bands are loaded by background workers and show as gray
//! until ready. Every parameter change starts a new generation, and renders
//! for older generations are abandoned cooperatively.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/api/metadata` | collection description and load status |
//! | GET | `/api/tile/{z}/{tx}/{ty}?gen=<n>` | 256×256 PNG, `X-Coverage` and `X-Generation` headers |
//! | GET, POST | `/api/params` | current / partial update of render parameters |
//! | GET | `/api/histogram?viewport=z/tx0/ty0/tx1/ty1[&apply=false]` | 1024-bin histograms of the visible values |
//! | POST | `/api/export` | start an export job from a (partial) job config |
//! | GET | `/api/export/{id}` | job status |
//! | GET | `/api/events` | server-sent events: band loads, generations, job progress |

mod cache;
mod loader;
mod routes;
mod session;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use thiserror::Error;

pub use cache::LruCache;
pub use loader::BandStatus;
pub use routes::{router, serve};
pub use session::{
    ChannelHistogram, CubeInfo, HistogramResponse, JobState, JobStatus, Metadata, ParamsAccepted, ParamsUpdate,
    PyramidInfo, RenderHook, RenderParams, ServiceConfig, Session, Snapshot, Tile, TileRange, TileStats,
};

/// Pushed on `/api/events`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Band { cube: usize, band: usize, status: BandStatus },
    Params { generation: u64 },
    Job { id: u64, state: JobState, done: usize, total: usize },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Band { .. } => "band",
            Event::Params { .. } => "params",
            Event::Job { .. } => "job",
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("generation {requested} superseded by {current}")]
    Superseded { requested: u64, current: u64 },
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub(crate) fn from_job(e: swathcube::job::JobError) -> Self {
        use swathcube::job::JobError;
        match e {
            JobError::Config(_) | JobError::Invalid(_) | JobError::Calibration(_) => {
                ServiceError::BadRequest(e.to_string())
            }
            _ => ServiceError::Internal(e.to_string()),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Superseded { .. } => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = serde_json::json!({ "error": self.to_string() });
        if let ServiceError::Superseded { current, .. } = self {
            body["status"] = "cancelled".into();
            body["generation"] = current.into();
        }
        (self.status(), axum::Json(body)).into_response()
    }
}
