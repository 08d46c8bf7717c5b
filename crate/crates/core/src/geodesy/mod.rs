//! Geodetic → UTM → local North-East-Down transforms, camera orientations
//! and per-line pose interpolation.
//!
//! Conventions used throughout:
//!
//! - Latitude/longitude in degrees on WGS84, altitude in meters above the
//!   ellipsoid.
//! - NED is a local Cartesian frame aligned with the UTM grid (north = grid
//!   north), with `down` positive toward the Earth.
//! - An [`Orientation`] maps camera-frame vectors into NED. The identity
//!   aims the camera nadir with the body x axis (top of the capture line)
//!   pointing north; the capture line spans the body y axis.
//! - Grid convergence is the clockwise angle from true north to grid north.
//!   It is positive east of the central meridian in the northern hemisphere.

mod orientation;
mod pose;
mod utm;

pub use orientation::Orientation;
pub use pose::{
    interpolate_poses, InsRecord, NedFrame, NedPoint, Pose, PoseTrack, ProjectedLog,
};
pub use utm::{
    grid_convergence, natural_zone, select_zone, to_ned, utm_to_wgs84, wgs84_to_utm,
    wgs84_to_utm_in, Hemisphere, UtmCoordinate, ZoneSelection,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesyError {
    #[error("invalid geodetic point: latitude {latitude}, longitude {longitude}")]
    InvalidPoint { latitude: f64, longitude: f64 },
    #[error("latitude {0}° is outside the UTM domain (±84°)")]
    UnsupportedLatitude(f64),
    #[error("UTM zone {0} is outside 1..=60")]
    InvalidZone(i32),
    #[error("easting {easting:.3} m is outside zone {zone}")]
    OutOfZone { easting: f64, zone: u8 },
    #[error("zone mismatch: point in {point_zone}{point_hemisphere}, origin in {origin_zone}{origin_hemisphere}")]
    ZoneMismatch {
        point_zone: u8,
        point_hemisphere: Hemisphere,
        origin_zone: u8,
        origin_hemisphere: Hemisphere,
    },
    #[error("empty track")]
    EmptyTrack,
    #[error("pose log timestamps are not strictly increasing at record {index}")]
    NonMonotonic { index: usize },
    #[error(
        "cube {cube}: line {line} at t={time:.6}s lies outside the pose log span \
         [{first:.6}, {last:.6}]; refusing to extrapolate"
    )]
    Extrapolation {
        cube: String,
        line: usize,
        time: f64,
        first: f64,
        last: f64,
    },
}

pub type Result<T> = std::result::Result<T, GeodesyError>;

/// A WGS84 position.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeodeticPoint {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl GeodeticPoint {
    /// Validates `latitude ∈ [-90, 90]` and `longitude ∈ [-180, 180)`.
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        let p = GeodeticPoint {
            latitude,
            longitude,
            altitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.latitude.is_finite()
            && self.longitude.is_finite()
            && self.altitude.is_finite()
            && (-90.0..=90.0).contains(&self.latitude)
            && (-180.0..180.0).contains(&self.longitude);
        if ok {
            Ok(())
        } else {
            Err(GeodesyError::InvalidPoint {
                latitude: self.latitude,
                longitude: self.longitude,
            })
        }
    }
}
