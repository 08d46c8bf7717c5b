//! Independent reference implementations for testing swathcube: synthetic
//! scenes and flights, a pinhole capture simulator, forward (direct)
//! georectification and a supersampled lookup oracle.
//!
//! Nothing here shares geometry code with the renderer beyond the pose and
//! frame types; rays are intersected with the ground directly.

pub mod analysis;
pub mod capture;
pub mod direct;
pub mod fixture;
pub mod flight;
pub mod scene;

use std::path::PathBuf;

use thiserror::Error;

pub use capture::{ground_hit, Camera, Radiometry, SimulatedCube};
pub use direct::{direct_georectify, supersampled_lookup, DirectResult};
pub use fixture::{write_fixture, FixtureFiles, FixtureSpec, SyntheticSurvey};
pub use flight::{AttitudeNoise, FlightPlan, SyntheticFlight};
pub use scene::SyntheticScene;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Cube(#[from] swathcube::cube_io::CubeError),
    #[error(transparent)]
    Geodesy(#[from] swathcube::geodesy::GeodesyError),
    #[error(transparent)]
    Calibration(#[from] swathcube::calibration::CalibrationError),
    #[error(transparent)]
    Job(#[from] swathcube::job::JobError),
    #[error("{path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl OracleError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OracleError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, OracleError>;
