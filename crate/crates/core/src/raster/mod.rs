//! Deterministic CPU rasterizer for footprint meshes.
//!
//! Rendering runs in two passes. The geometry pass resolves, for every
//! output pixel, which cube, line and sample it reads from. The shading pass
//! then evaluates the calibration for each requested band at those lookups,
//! so the geometry is computed once however many bands are exported.

mod coverage;
mod geometry;
mod shade;
mod view;

use thiserror::Error;

pub use coverage::{coverage_rule, Triangle};
pub use geometry::{fragments, rasterize, Fragment, GeometryBuffer, Lookup, PARTITION_ROWS};
pub use shade::{shade_band, PixelBuffer, ShadeSource, COVERED, PENDING, UNCOVERED};
pub use view::{ViewWindow, TILE_SIZE};

use crate::mesh::MeshVertex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("invalid view: {0}")]
    InvalidView(String),
    #[error("render cancelled")]
    Cancelled,
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// A mesh vertex in window-local pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenVertex {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

pub fn transform_vertex(v: &MeshVertex, view: &ViewWindow) -> ScreenVertex {
    let (x, y) = view.to_local(v.north, v.east);
    ScreenVertex {
        x,
        y,
        depth: v.depth,
    }
}

/// A cancellation check that never fires.
pub fn never_cancel() -> bool {
    false
}
