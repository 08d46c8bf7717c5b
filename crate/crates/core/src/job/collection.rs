use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{debug, info, warn};
use rayon::prelude::*;

use super::config::{CubeRange, GroundSetting};
use super::{JobError, Result};
use crate::calibration::{
    nearest_band, CalibrationMode, CalibrationSet, Calibrator, IlluminationSpectrum,
};
use crate::cube_io::{read_pose_log, BandPlane, CubeHandle};
use crate::geodesy::{InsRecord, NedFrame, PoseTrack, ProjectedLog};
use crate::mesh::{
    build_mesh, estimate_ground_height, mesh_bounds, project_fov, Bounds, FootprintMesh,
    FovVectors, GroundModel,
};
use crate::raster::{rasterize, GeometryBuffer, PixelBuffer, ShadeSource, ViewWindow};

/// Header key holding the full field of view in degrees.
pub const FOV_KEY: &str = "sc fov";

/// A consecutive cube is joined to the previous one's mesh when its first
/// line starts within this many line periods of the previous last line.
pub const CHAIN_GAP_LINES: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionOptions {
    /// Full field of view in degrees; read from the cube header when unset.
    pub fov_deg: Option<f64>,
    pub ground: GroundSetting,
    pub nominal_agl: f64,
}

impl Default for CollectionOptions {
    fn default() -> Self {
        CollectionOptions {
            fov_deg: None,
            ground: GroundSetting::Auto,
            nominal_agl: super::config::DEFAULT_NOMINAL_AGL,
        }
    }
}

/// One flight's cubes with their poses and footprint meshes in a shared
/// frame.
#[derive(Debug, Clone)]
pub struct Collection {
    cubes: Vec<CubeHandle>,
    tracks: Vec<PoseTrack>,
    /// Pose of each cube's successor's first line, when chained.
    links: Vec<Option<crate::geodesy::Pose>>,
    frame: NedFrame,
    fov: FovVectors,
    ground: GroundModel,
    ground_estimate: Option<f64>,
    meshes: Vec<FootprintMesh>,
    calib: Option<Arc<CalibrationSet>>,
    illumination: Option<Arc<IlluminationSpectrum>>,
}

fn line_times<'a>(cube: &'a CubeHandle) -> Result<&'a [f64]> {
    match &cube.header().line_times {
        Some(t) if t.len() == cube.header().lines => Ok(t),
        Some(t) => Err(JobError::Invalid(format!(
            "{}: {} line times for {} lines",
            cube.id(),
            t.len(),
            cube.header().lines
        ))),
        None => Err(JobError::Invalid(format!(
            "{}: header has no per-line timestamps (sc line times)",
            cube.id()
        ))),
    }
}

/// Field of view for a collection: the explicit value, else the first
/// cube's header.
pub fn resolve_fov(cubes: &[CubeHandle], explicit: Option<f64>) -> Result<FovVectors> {
    let from_header = |c: &CubeHandle| -> Option<Result<f64>> {
        c.header().extra(FOV_KEY).map(|v| {
            v.trim().parse::<f64>().map_err(|_| {
                JobError::Invalid(format!("{}: `{FOV_KEY}` value {v:?} is not a number", c.id()))
            })
        })
    };
    let theta = match explicit {
        Some(t) => t,
        None => match cubes.first().and_then(from_header) {
            Some(t) => t?,
            None => {
                return Err(JobError::Invalid(
                    "no field of view given and the first cube header has no `sc fov`".into(),
                ))
            }
        },
    };
    for c in cubes {
        if let Some(Ok(t)) = from_header(c) {
            if (t - theta).abs() > 1e-9 {
                warn!("{}: header field of view {t}° differs from the {theta}° in use", c.id());
            }
        }
    }
    Ok(project_fov(theta)?)
}

impl Collection {
    /// Opens cubes and the pose log from disk.
    pub fn load(cube_paths: &[PathBuf], pose_log: &Path, opts: &CollectionOptions) -> Result<Self> {
        let cubes = cube_paths
            .iter()
            .map(|p| CubeHandle::open(p))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let records = read_pose_log(pose_log)?;
        Self::from_records(cubes, &records, opts)
    }

    /// Builds the frame from the pose log: origin at the first line of the
    /// first cube, heights relative to the ground plane.
    pub fn from_records(cubes: Vec<CubeHandle>, records: &[InsRecord], opts: &CollectionOptions) -> Result<Self> {
        if cubes.is_empty() {
            return Err(JobError::Invalid("no cubes given".into()));
        }
        if records.is_empty() {
            return Err(JobError::Invalid("pose log has no records".into()));
        }
        let fov = resolve_fov(&cubes, opts.fov_deg)?;
        let mut t0 = f64::INFINITY;
        let mut t1 = f64::NEG_INFINITY;
        for c in &cubes {
            let t = line_times(c)?;
            if let (Some(a), Some(b)) = (t.first(), t.last()) {
                t0 = t0.min(*a);
                t1 = t1.max(*b);
            }
        }
        let in_span: Vec<f64> = records
            .iter()
            .filter(|r| (t0..=t1).contains(&r.timestamp))
            .map(|r| r.position.altitude)
            .collect();
        let altitudes = if in_span.is_empty() {
            records.iter().map(|r| r.position.altitude).collect()
        } else {
            in_span
        };
        let estimate = estimate_ground_height(altitudes, opts.nominal_agl);
        let ground_alt = match opts.ground {
            GroundSetting::Fixed(a) => a,
            GroundSetting::Auto => estimate
                .ok_or_else(|| JobError::Invalid("cannot estimate ground height".into()))?,
        };
        let anchor = line_times(&cubes[0])?
            .first()
            .copied()
            .ok_or_else(|| JobError::Invalid(format!("{}: no lines", cubes[0].id())))?;
        let frame = NedFrame::from_records(records, anchor, ground_alt)?;
        info!(
            "frame: UTM zone {}{}, origin E {:.3} N {:.3}, ground {:.2} m, convergence {:.4}°",
            frame.zone,
            frame.hemisphere.letter(),
            frame.origin_easting,
            frame.origin_northing,
            ground_alt,
            frame.convergence_deg
        );
        let log = ProjectedLog::new(records, &frame)?;
        let mut c = Self::from_log(cubes, &log, frame, fov, GroundModel::new(ground_alt, &frame))?;
        c.ground_estimate = estimate;
        Ok(c)
    }

    /// Builds a collection from a log already in `frame` (synthetic flights).
    pub fn from_log(
        cubes: Vec<CubeHandle>,
        log: &ProjectedLog,
        frame: NedFrame,
        fov: FovVectors,
        ground: GroundModel,
    ) -> Result<Self> {
        let tracks = cubes
            .iter()
            .map(|c| Ok(log.interpolate(line_times(c)?, c.id())?))
            .collect::<Result<Vec<_>>>()?;
        let mut links = Vec::with_capacity(cubes.len());
        for i in 0..cubes.len() {
            let link = match cubes.get(i + 1) {
                Some(next) if chains(line_times(&cubes[i])?, line_times(next)?) => {
                    debug!("{} chains into {}", cubes[i].id(), next.id());
                    tracks[i + 1].first()
                }
                _ => None,
            };
            links.push(link);
        }
        let mut c = Collection {
            cubes,
            tracks,
            links,
            frame,
            fov,
            ground,
            ground_estimate: None,
            meshes: Vec::new(),
            calib: None,
            illumination: None,
        };
        c.rebuild_meshes()?;
        Ok(c)
    }

    fn rebuild_meshes(&mut self) -> Result<()> {
        let meshes = self
            .cubes
            .par_iter()
            .zip(&self.tracks)
            .zip(&self.links)
            .map(|((c, t), link)| {
                build_mesh(c.id(), c.header().samples, t, &self.fov, &self.ground, link.as_ref())
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        self.meshes = meshes;
        Ok(())
    }

    /// Moves the ground plane and rebuilds every mesh.
    pub fn set_ground_altitude(&mut self, altitude: f64) -> Result<()> {
        if !altitude.is_finite() {
            return Err(JobError::Invalid(format!("ground altitude {altitude} is not finite")));
        }
        let previous = self.ground;
        self.ground = GroundModel::new(altitude, &self.frame);
        if let Err(e) = self.rebuild_meshes() {
            self.ground = previous;
            self.rebuild_meshes()?;
            return Err(e);
        }
        Ok(())
    }

    pub fn set_calibration(&mut self, calib: Option<Arc<CalibrationSet>>, illumination: Option<Arc<IlluminationSpectrum>>) {
        self.calib = calib;
        self.illumination = illumination;
    }

    pub fn cubes(&self) -> &[CubeHandle] {
        &self.cubes
    }

    pub fn tracks(&self) -> &[PoseTrack] {
        &self.tracks
    }

    pub fn meshes(&self) -> &[FootprintMesh] {
        &self.meshes
    }

    pub fn frame(&self) -> &NedFrame {
        &self.frame
    }

    pub fn fov(&self) -> &FovVectors {
        &self.fov
    }

    pub fn ground(&self) -> &GroundModel {
        &self.ground
    }

    /// The automatic ground estimate, when the pose log allowed one.
    pub fn ground_estimate(&self) -> Option<f64> {
        self.ground_estimate
    }

    pub fn has_calibration(&self) -> bool {
        self.calib.is_some()
    }

    pub fn has_illumination(&self) -> bool {
        self.illumination.is_some()
    }

    /// Cube indices inside `range`, in capture order.
    pub fn selected(&self, range: Option<CubeRange>) -> Result<Vec<usize>> {
        let n = self.cubes.len();
        match range {
            None => Ok((0..n).collect()),
            Some(r) if r.first > r.last => Err(JobError::Invalid(format!(
                "range {}:{} is reversed",
                r.first, r.last
            ))),
            Some(r) if r.last >= n => Err(JobError::Invalid(format!(
                "range {}:{} exceeds the {n} cubes loaded",
                r.first, r.last
            ))),
            Some(r) => Ok((r.first..=r.last).collect()),
        }
    }

    pub fn bounds(&self, range: Option<CubeRange>) -> Result<Bounds> {
        let sel = self.selected(range)?;
        mesh_bounds(sel.iter().map(|&i| &self.meshes[i]))
            .ok_or_else(|| JobError::Invalid("collection has no footprint".into()))
    }

    /// Nearest band of cube `cube` to `wavelength`. Cubes without a
    /// wavelength list take the value as a band index.
    pub fn band_index(&self, cube: usize, wavelength: f64) -> usize {
        let h = self.cubes[cube].header();
        if h.wavelengths.is_empty() {
            (wavelength.round().max(0.0) as usize).min(h.bands - 1)
        } else {
            nearest_band(&h.wavelengths, wavelength)
        }
    }

    /// Per-cube calibrators for `mode`.
    pub fn calibrators(&self, mode: CalibrationMode) -> Result<Vec<Calibrator>> {
        self.cubes
            .iter()
            .map(|c| {
                Ok(Calibrator::new(
                    mode,
                    c.header(),
                    c.id(),
                    self.calib.clone(),
                    self.illumination.clone(),
                )?)
            })
            .collect()
    }

    /// Geometry pass over the cubes in `selection`, painted in that order.
    pub fn geometry(
        &self,
        view: &ViewWindow,
        selection: &[usize],
        cancelled: &(dyn Fn() -> bool + Sync),
    ) -> Result<GeometryBuffer> {
        let meshes: Vec<&FootprintMesh> = selection.iter().map(|&i| &self.meshes[i]).collect();
        Ok(rasterize(&meshes, view, cancelled)?)
    }

    /// Renders `wavelengths` (one per channel). `band` supplies a band
    /// plane for `(cube, band)` or `None` if it isn't available, which marks
    /// those pixels pending.
    pub fn render(
        &self,
        view: &ViewWindow,
        selection: &[usize],
        wavelengths: &[f64],
        calibrators: &[Calibrator],
        band: &(dyn Fn(usize, usize) -> Option<BandPlane> + Sync),
        cancelled: &(dyn Fn() -> bool + Sync),
    ) -> Result<PixelBuffer> {
        let geom = self.geometry(view, selection, cancelled)?;
        let used = cubes_used(&geom, selection.len());
        let planes: Vec<Vec<Option<(BandPlane, usize)>>> = wavelengths
            .iter()
            .map(|&w| {
                selection
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        if !used[k] {
                            return None;
                        }
                        let b = self.band_index(c, w);
                        band(c, b).map(|p| (p, b))
                    })
                    .collect()
            })
            .collect();
        if cancelled() {
            return Err(JobError::Cancelled);
        }
        let sources: Vec<Vec<Option<ShadeSource>>> = planes
            .iter()
            .map(|per_cube| {
                per_cube
                    .iter()
                    .zip(selection)
                    .map(|(p, &c)| {
                        p.as_ref().map(|(plane, b)| ShadeSource {
                            plane: plane.values(),
                            samples: plane.samples,
                            calib: calibrators[c].band(*b),
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(PixelBuffer::shade(&geom, &sources))
    }
}

/// Which of the rendered meshes own at least one pixel.
pub(crate) fn cubes_used(geom: &GeometryBuffer, n: usize) -> Vec<bool> {
    let mut used = vec![false; n];
    for l in &geom.lookups {
        if l.is_covered() {
            used[l.cube as usize] = true;
        }
    }
    used
}

fn chains(a: &[f64], b: &[f64]) -> bool {
    let (Some(&last), Some(&first)) = (a.last(), b.first()) else {
        return false;
    };
    let period = if a.len() >= 2 {
        (last - a[0]) / (a.len() - 1) as f64
    } else if b.len() >= 2 {
        (b[b.len() - 1] - first) / (b.len() - 1) as f64
    } else {
        return false;
    };
    let gap = first - last;
    period > 0.0 && gap > 0.0 && gap <= CHAIN_GAP_LINES * period
}
