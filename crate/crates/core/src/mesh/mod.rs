//! Ground-footprint meshes under a flat-ground model.
//!
//! Each cube line is a segment on the ground between the intersections of
//! its two field-of-view edge rays. Consecutive lines are joined by quads,
//! each split into two triangles along the `(i, 0)`–`(i + 1, S)` diagonal.

use thiserror::Error;

use crate::geodesy::{NedFrame, Pose, PoseTrack};

/// Rays whose rotated down component is at or below this are rejected.
pub const DEGENERATE_RAY_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("field of view {0}° must be in (0, 180)")]
    FovOutOfRange(f64),
    #[error("{cube}: line {line}: ray is parallel to or rising above the ground plane")]
    DegenerateRay { cube: String, line: usize },
    #[error("{cube}: line {line}: camera at down={camera_down:.3} m is not above the ground plane at down={ground_down:.3} m")]
    BelowGround {
        cube: String,
        line: usize,
        camera_down: f64,
        ground_down: f64,
    },
    #[error("{0}: empty pose track")]
    EmptyTrack(String),
}

pub type Result<T> = std::result::Result<T, MeshError>;

/// Camera-frame edge vectors of the capture line, heads at `(0, ±d, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FovVectors {
    pub theta_deg: f64,
    /// Half-width of the line at unit depth, `tan(θ/2)`.
    pub d: f64,
}

impl FovVectors {
    /// Head of the first (sample 0) and last (sample S) edge ray.
    pub fn heads(&self) -> [[f64; 3]; 2] {
        [[0.0, -self.d, 1.0], [0.0, self.d, 1.0]]
    }
}

pub fn project_fov(theta_deg: f64) -> Result<FovVectors> {
    if !(theta_deg > 0.0 && theta_deg < 180.0) {
        return Err(MeshError::FovOutOfRange(theta_deg));
    }
    Ok(FovVectors {
        theta_deg,
        d: (theta_deg.to_radians() / 2.0).tan(),
    })
}

/// Flat ground plane at a known altitude.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroundModel {
    /// Meters above the ellipsoid.
    pub altitude: f64,
    /// The same plane as a NED down coordinate.
    pub down: f64,
}

impl GroundModel {
    pub fn new(altitude: f64, frame: &NedFrame) -> Self {
        GroundModel {
            altitude,
            down: frame.down_of_altitude(altitude),
        }
    }

    /// A plane given directly in NED, for frames whose origin altitude is
    /// unknown or irrelevant.
    pub fn at_down(down: f64) -> Self {
        GroundModel {
            altitude: -down,
            down,
        }
    }
}

/// Ground height estimate: lowest camera altitude minus nominal height above
/// ground.
pub fn estimate_ground_height(altitudes: impl IntoIterator<Item = f64>, nominal_agl: f64) -> Option<f64> {
    altitudes
        .into_iter()
        .filter(|a| a.is_finite())
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))))
        .map(|min| min - nominal_agl)
}

/// Where one line's edge rays meet the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFootprint {
    pub line: usize,
    /// `(north, east)` of the sample-0 and sample-S ends.
    pub endpoints: [[f64; 2]; 2],
    /// Ray extension factor from camera to ground for each end.
    pub depths: [f64; 2],
}

pub fn line_endpoints(
    pose: &Pose,
    fov: &FovVectors,
    ground: &GroundModel,
    cube: &str,
    line: usize,
) -> Result<LineFootprint> {
    let p = pose.position;
    let height = ground.down - p.down;
    if !(height > 0.0) {
        return Err(MeshError::BelowGround {
            cube: cube.to_string(),
            line,
            camera_down: p.down,
            ground_down: ground.down,
        });
    }
    let mut endpoints = [[0.0; 2]; 2];
    let mut depths = [0.0; 2];
    for (k, head) in fov.heads().into_iter().enumerate() {
        let r = pose.orientation.rotate(head);
        if r[2] <= DEGENERATE_RAY_EPSILON {
            return Err(MeshError::DegenerateRay {
                cube: cube.to_string(),
                line,
            });
        }
        let s = height / r[2];
        endpoints[k] = [p.north + s * r[0], p.east + s * r[1]];
        depths[k] = s;
    }
    Ok(LineFootprint {
        line,
        endpoints,
        depths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshVertex {
    pub north: f64,
    pub east: f64,
    pub depth: f64,
}

/// Triangle strip over one cube's lines.
///
/// Vertices come in pairs per line, `2·i` at sample 0 and `2·i + 1` at
/// sample S. Quad `i` joins line `i` to line `i + 1`; when the cube is
/// chained, the final pair is the next cube's first line.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintMesh {
    pub cube: String,
    pub samples: usize,
    pub lines: usize,
    pub vertices: Vec<MeshVertex>,
    pub chained: bool,
}

impl FootprintMesh {
    pub fn quad_count(&self) -> usize {
        self.vertices.len() / 2 - 1
    }

    pub fn triangle_count(&self) -> usize {
        2 * self.quad_count()
    }

    /// Vertex indices of triangle `t`, and the line index it carries.
    #[inline]
    pub fn triangle(&self, t: usize) -> ([usize; 3], usize) {
        let q = t / 2;
        let (a, b, c, d) = (2 * q, 2 * q + 1, 2 * q + 2, 2 * q + 3);
        if t % 2 == 0 {
            ([a, b, d], q)
        } else {
            ([a, d, c], q)
        }
    }

    /// Sample coordinate of a vertex: 0 on the first edge, S on the last.
    #[inline]
    pub fn vertex_sample(&self, v: usize) -> f64 {
        if v % 2 == 0 {
            0.0
        } else {
            self.samples as f64
        }
    }

    pub fn bounds(&self) -> Option<Bounds> {
        Bounds::of_points(self.vertices.iter().map(|v| (v.north, v.east)))
    }

    /// Summed area of all quads, square meters.
    pub fn area(&self) -> f64 {
        (0..self.quad_count())
            .map(|q| {
                let v = &self.vertices;
                let ring = [v[2 * q], v[2 * q + 1], v[2 * q + 3], v[2 * q + 2]];
                shoelace(&ring).abs()
            })
            .sum()
    }
}

fn shoelace(ring: &[MeshVertex]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.east * b.north - b.east * a.north
        })
        .sum::<f64>()
        / 2.0
}

/// Builds one cube's mesh. `next_first` is the pose of the next cube's first
/// line; without it the last line gets no quad.
pub fn build_mesh(
    cube: &str,
    samples: usize,
    track: &PoseTrack,
    fov: &FovVectors,
    ground: &GroundModel,
    next_first: Option<&Pose>,
) -> Result<FootprintMesh> {
    if track.is_empty() {
        return Err(MeshError::EmptyTrack(cube.to_string()));
    }
    let lines = track.len();
    let mut vertices = Vec::with_capacity(2 * (lines + 1));
    let extra = next_first.map(|p| (p, lines));
    let poses = (0..lines).map(|i| (track.pose(i), i)).chain(extra.map(|(p, i)| (*p, i)));
    for (pose, line) in poses {
        let f = line_endpoints(&pose, fov, ground, cube, line)?;
        for k in 0..2 {
            vertices.push(MeshVertex {
                north: f.endpoints[k][0],
                east: f.endpoints[k][1],
                depth: f.depths[k],
            });
        }
    }
    Ok(FootprintMesh {
        cube: cube.to_string(),
        samples,
        lines,
        vertices,
        chained: next_first.is_some(),
    })
}

/// Axis-aligned north/east rectangle, meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub min_north: f64,
    pub max_north: f64,
    pub min_east: f64,
    pub max_east: f64,
}

impl Bounds {
    pub fn of_points(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Bounds> {
        let mut it = points.into_iter();
        let (n, e) = it.next()?;
        let mut b = Bounds {
            min_north: n,
            max_north: n,
            min_east: e,
            max_east: e,
        };
        for (n, e) in it {
            b.min_north = b.min_north.min(n);
            b.max_north = b.max_north.max(n);
            b.min_east = b.min_east.min(e);
            b.max_east = b.max_east.max(e);
        }
        Some(b)
    }

    pub fn union(&self, o: &Bounds) -> Bounds {
        Bounds {
            min_north: self.min_north.min(o.min_north),
            max_north: self.max_north.max(o.max_north),
            min_east: self.min_east.min(o.min_east),
            max_east: self.max_east.max(o.max_east),
        }
    }

    pub fn width(&self) -> f64 {
        self.max_east - self.min_east
    }

    pub fn height(&self) -> f64 {
        self.max_north - self.min_north
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.min_north + self.max_north) / 2.0,
            (self.min_east + self.max_east) / 2.0,
        )
    }
}

pub fn mesh_bounds<'a>(meshes: impl IntoIterator<Item = &'a FootprintMesh>) -> Option<Bounds> {
    meshes
        .into_iter()
        .filter_map(FootprintMesh::bounds)
        .reduce(|a, b| a.union(&b))
}
