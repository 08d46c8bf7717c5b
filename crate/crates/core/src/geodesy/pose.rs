use super::utm::{grid_convergence, select_zone, to_ned, utm_to_wgs84, wgs84_to_utm_in};
use super::{GeodesyError, GeodeticPoint, Hemisphere, Orientation, Result, UtmCoordinate};

/// Local Cartesian position in meters relative to a [`NedFrame`] origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct NedPoint {
    pub north: f64,
    pub east: f64,
    pub down: f64,
}

impl NedPoint {
    pub const fn new(north: f64, east: f64, down: f64) -> Self {
        NedPoint { north, east, down }
    }

    pub fn lerp(&self, other: &NedPoint, t: f64) -> NedPoint {
        NedPoint {
            north: self.north + (other.north - self.north) * t,
            east: self.east + (other.east - self.east) * t,
            down: self.down + (other.down - self.down) * t,
        }
    }
}

/// The collection-wide local frame: one UTM zone, one origin, one heading
/// offset. Declared once per collection and recorded in output metadata.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NedFrame {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub origin_easting: f64,
    pub origin_northing: f64,
    /// Altitude (m above ellipsoid) where `down == 0`.
    pub origin_altitude: f64,
    /// Grid convergence at the origin, degrees.
    pub convergence_deg: f64,
}

impl NedFrame {
    /// Builds the frame for a pose log: zone from the track centroid, origin
    /// at the camera position interpolated at `anchor_time` (normally the
    /// first line of the first cube), heights relative to
    /// `reference_altitude`.
    pub fn from_records(
        records: &[InsRecord],
        anchor_time: f64,
        reference_altitude: f64,
    ) -> Result<NedFrame> {
        check_monotonic(records)?;
        let positions: Vec<GeodeticPoint> = records.iter().map(|r| r.position).collect();
        let selection = select_zone(&positions)?;
        let (first, last) = (records[0].timestamp, records[records.len() - 1].timestamp);
        if !(first..=last).contains(&anchor_time) {
            return Err(GeodesyError::Extrapolation {
                cube: "<frame origin>".into(),
                line: 0,
                time: anchor_time,
                first,
                last,
            });
        }
        let k = records
            .partition_point(|r| r.timestamp <= anchor_time)
            .clamp(1, records.len())
            - 1;
        let a = wgs84_to_utm_in(&records[k].position, selection.zone, selection.hemisphere)?;
        let (easting, northing) = if records[k].timestamp == anchor_time || k + 1 == records.len() {
            (a.easting, a.northing)
        } else {
            let b = wgs84_to_utm_in(&records[k + 1].position, selection.zone, selection.hemisphere)?;
            let t = (anchor_time - records[k].timestamp)
                / (records[k + 1].timestamp - records[k].timestamp);
            (
                a.easting + (b.easting - a.easting) * t,
                a.northing + (b.northing - a.northing) * t,
            )
        };
        let origin = UtmCoordinate {
            easting,
            northing,
            zone: selection.zone,
            hemisphere: selection.hemisphere,
        };
        let geodetic = utm_to_wgs84(&origin, reference_altitude)?;
        Ok(NedFrame {
            zone: selection.zone,
            hemisphere: selection.hemisphere,
            origin_easting: easting,
            origin_northing: northing,
            origin_altitude: reference_altitude,
            convergence_deg: grid_convergence(&geodetic, selection.zone)?,
        })
    }

    /// The yaw rotation taking true-north-referenced attitudes onto the grid.
    pub fn heading_offset(&self) -> Orientation {
        Orientation::from_yaw(-self.convergence_deg.to_radians())
    }

    pub fn project(&self, p: &GeodeticPoint) -> Result<NedPoint> {
        let u = wgs84_to_utm_in(p, self.zone, self.hemisphere)?;
        to_ned(&u, p.altitude, self)
    }

    pub fn unproject(&self, n: &NedPoint) -> Result<GeodeticPoint> {
        let u = UtmCoordinate {
            easting: self.origin_easting + n.east,
            northing: self.origin_northing + n.north,
            zone: self.zone,
            hemisphere: self.hemisphere,
        };
        utm_to_wgs84(&u, self.origin_altitude - n.down)
    }

    pub fn altitude_of(&self, n: &NedPoint) -> f64 {
        self.origin_altitude - n.down
    }

    pub fn down_of_altitude(&self, altitude: f64) -> f64 {
        self.origin_altitude - altitude
    }
}

/// One row of a pose log.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InsRecord {
    pub timestamp: f64,
    pub position: GeodeticPoint,
    /// Degrees, aerospace ZYX convention, yaw relative to true north.
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl InsRecord {
    pub fn attitude(&self) -> Orientation {
        Orientation::from_euler_zyx(
            self.roll.to_radians(),
            self.pitch.to_radians(),
            self.yaw.to_radians(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: NedPoint,
    pub orientation: Orientation,
}

/// Per-line camera poses for one cube.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseTrack {
    pub positions: Vec<NedPoint>,
    pub orientations: Vec<Orientation>,
}

impl PoseTrack {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn pose(&self, line: usize) -> Pose {
        Pose {
            position: self.positions[line],
            orientation: self.orientations[line],
        }
    }

    pub fn first(&self) -> Option<Pose> {
        (!self.is_empty()).then(|| self.pose(0))
    }

    pub fn push(&mut self, pose: Pose) {
        self.positions.push(pose.position);
        self.orientations.push(pose.orientation);
    }
}

impl FromIterator<Pose> for PoseTrack {
    fn from_iter<I: IntoIterator<Item = Pose>>(iter: I) -> Self {
        let mut track = PoseTrack::default();
        for p in iter {
            track.push(p);
        }
        track
    }
}

fn check_monotonic(records: &[InsRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(GeodesyError::EmptyTrack);
    }
    for (i, w) in records.windows(2).enumerate() {
        if !(w[1].timestamp > w[0].timestamp) {
            return Err(GeodesyError::NonMonotonic { index: i + 1 });
        }
    }
    Ok(())
}

/// A pose log already expressed in the collection frame, ready to be
/// sampled at line exposure times.
#[derive(Debug, Clone)]
pub struct ProjectedLog {
    times: Vec<f64>,
    positions: Vec<NedPoint>,
    orientations: Vec<Orientation>,
}

impl ProjectedLog {
    /// Projects every record into `frame`, applying its heading offset.
    pub fn new(records: &[InsRecord], frame: &NedFrame) -> Result<Self> {
        check_monotonic(records)?;
        let offset = frame.heading_offset();
        let mut positions = Vec::with_capacity(records.len());
        let mut orientations = Vec::with_capacity(records.len());
        for r in records {
            positions.push(frame.project(&r.position)?);
            orientations.push(offset.compose(&r.attitude()));
        }
        Ok(ProjectedLog {
            times: records.iter().map(|r| r.timestamp).collect(),
            positions,
            orientations,
        })
    }

    /// Builds a log directly from NED samples (synthetic flights, tests).
    pub fn from_ned(
        times: Vec<f64>,
        positions: Vec<NedPoint>,
        orientations: Vec<Orientation>,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(GeodesyError::EmptyTrack);
        }
        assert_eq!(times.len(), positions.len());
        assert_eq!(times.len(), orientations.len());
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(GeodesyError::NonMonotonic { index: i + 1 });
            }
        }
        Ok(ProjectedLog {
            times,
            positions,
            orientations,
        })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn positions(&self) -> &[NedPoint] {
        &self.positions
    }

    /// Pose at time `t`, or `None` outside the logged span.
    pub fn sample(&self, t: f64) -> Option<Pose> {
        let (first, last) = self.span();
        if !(first..=last).contains(&t) {
            return None;
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        if self.times[k] == t || k + 1 == self.times.len() {
            return Some(Pose {
                position: self.positions[k],
                orientation: self.orientations[k],
            });
        }
        let frac = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Some(Pose {
            position: self.positions[k].lerp(&self.positions[k + 1], frac),
            orientation: self.orientations[k].slerp(&self.orientations[k + 1], frac),
        })
    }

    /// Assigns each line the pose at the start of its exposure.
    pub fn interpolate(&self, line_times: &[f64], cube: &str) -> Result<PoseTrack> {
        let (first, last) = self.span();
        line_times
            .iter()
            .enumerate()
            .map(|(line, &time)| {
                self.sample(time).ok_or_else(|| GeodesyError::Extrapolation {
                    cube: cube.to_string(),
                    line,
                    time,
                    first,
                    last,
                })
            })
            .collect()
    }
}

/// Projects `records` into `frame` and samples them at `line_times`.
pub fn interpolate_poses(
    records: &[InsRecord],
    line_times: &[f64],
    frame: &NedFrame,
    cube: &str,
) -> Result<PoseTrack> {
    ProjectedLog::new(records, frame)?.interpolate(line_times, cube)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64, lat: f64, lon: f64, alt: f64, yaw: f64) -> InsRecord {
        InsRecord {
            timestamp: t,
            position: GeodeticPoint::new(lat, lon, alt).unwrap(),
            roll: 0.0,
            pitch: 0.0,
            yaw,
        }
    }

    fn log() -> Vec<InsRecord> {
        vec![
            record(10.0, 35.1175, -89.9711, 135.0, 0.0),
            record(10.005, 35.11755, -89.9711, 135.0, 10.0),
            record(10.010, 35.11760, -89.9711, 136.0, 20.0),
        ]
    }

    #[test]
    fn frame_origin_is_first_line_position() {
        let recs = log();
        let frame = NedFrame::from_records(&recs, 10.0, 95.0).unwrap();
        assert_eq!(frame.zone, 16);
        let p = frame.project(&recs[0].position).unwrap();
        assert_eq!((p.north, p.east), (0.0, 0.0));
        assert_eq!(p.down, -40.0);
        assert!((frame.convergence_deg - (-1.71018)).abs() < 1e-4);
    }

    #[test]
    fn node_times_return_record_pose() {
        let recs = log();
        let frame = NedFrame::from_records(&recs, 10.0, 95.0).unwrap();
        let projected = ProjectedLog::new(&recs, &frame).unwrap();
        let track = projected.interpolate(&[10.005], "c").unwrap();
        assert_eq!(track.positions[0], projected.positions()[1]);
        assert_eq!(track.orientations[0], frame.heading_offset().compose(&recs[1].attitude()));
    }

    #[test]
    fn midpoint_is_linear_and_half_slerp() {
        let recs = log();
        let frame = NedFrame::from_records(&recs, 10.0, 95.0).unwrap();
        let projected = ProjectedLog::new(&recs, &frame).unwrap();
        let track = projected.interpolate(&[10.0075], "c").unwrap();
        let (a, b) = (projected.positions()[1], projected.positions()[2]);
        let mid = track.positions[0];
        assert!((mid.north - (a.north + b.north) / 2.0).abs() < 1e-9);
        assert!((mid.down - (a.down + b.down) / 2.0).abs() < 1e-12);
        let yaw = track.orientations[0].to_euler_zyx().2.to_degrees();
        assert!((yaw - (15.0 - frame.convergence_deg)).abs() < 1e-9);
    }

    #[test]
    fn extrapolation_names_cube_and_line() {
        let recs = log();
        let frame = NedFrame::from_records(&recs, 10.0, 95.0).unwrap();
        let err = interpolate_poses(&recs, &[10.0, 10.002, 10.5], &frame, "cube_07").unwrap_err();
        match &err {
            GeodesyError::Extrapolation { cube, line, .. } => {
                assert_eq!(cube, "cube_07");
                assert_eq!(*line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("cube_07"));
    }

    #[test]
    fn non_monotonic_log_rejected() {
        let mut recs = log();
        recs[2].timestamp = recs[1].timestamp;
        assert_eq!(
            NedFrame::from_records(&recs, 10.0, 95.0),
            Err(GeodesyError::NonMonotonic { index: 2 })
        );
    }

    #[test]
    fn unproject_inverts_project() {
        let recs = log();
        let frame = NedFrame::from_records(&recs, 10.0, 95.0).unwrap();
        let p = frame.project(&recs[2].position).unwrap();
        let g = frame.unproject(&p).unwrap();
        assert!((g.latitude - recs[2].position.latitude).abs() < 1e-11);
        assert!((g.longitude - recs[2].position.longitude).abs() < 1e-11);
        assert!((g.altitude - 136.0).abs() < 1e-12);
    }
}
