use std::path::{Path, PathBuf};

use swathcube::calibration::CalibrationSet;
use swathcube::cube_io::{
    ByteSource, CaptureSettings, CubeHandle, CubeHeader, CubeWriter, DataType, MemorySource,
};
use swathcube::geodesy::{Pose, PoseTrack, ProjectedLog};
use swathcube::job::FOV_KEY;
use swathcube::mesh::{project_fov, FovVectors, GroundModel};

use crate::scene::SyntheticScene;
use crate::{OracleError, Result};

/// Pinhole line camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub samples: usize,
    pub bands: usize,
    pub fov: FovVectors,
    pub wavelengths: Vec<f64>,
}

impl Camera {
    /// Bands spread evenly over 400–1000 nm.
    pub fn new(samples: usize, bands: usize, fov_deg: f64) -> Self {
        let wavelengths = if bands == 1 {
            vec![700.0]
        } else {
            (0..bands)
                .map(|b| 400.0 + 600.0 * b as f64 / (bands - 1) as f64)
                .collect()
        };
        Camera {
            samples,
            bands,
            fov: project_fov(fov_deg).expect("valid field of view"),
            wavelengths,
        }
    }

    /// Camera-frame ray at continuous sample coordinate `u` in `[0, S]`;
    /// sample `s` has its center at `u = s + 0.5`.
    #[inline]
    pub fn ray(&self, u: f64) -> [f64; 3] {
        let d = self.fov.d;
        [0.0, -d + 2.0 * d * u / self.samples as f64, 1.0]
    }
}

/// Where a camera-frame ray from `pose` meets the ground, as `(north, east)`.
#[inline]
pub fn ground_hit(pose: &Pose, ray: [f64; 3], ground: &GroundModel) -> Option<[f64; 2]> {
    let r = pose.orientation.rotate(ray);
    let h = ground.down - pose.position.down;
    if r[2] <= 0.0 || h <= 0.0 {
        return None;
    }
    let s = h / r[2];
    Some([pose.position.north + s * r[0], pose.position.east + s * r[1]])
}

/// Sensor radiometry injected into simulated raw values, so that
/// calibrating recovers the scene: `raw = value · response / rad + dark`.
#[derive(Debug, Clone, PartialEq)]
pub struct Radiometry {
    pub calib: CalibrationSet,
    pub settings: CaptureSettings,
}

impl Radiometry {
    /// Smoothly varying dark and rad lines; capture at half the reference
    /// exposure (response 0.5).
    pub fn synthetic(samples: usize, bands: usize) -> Self {
        let mut dark = Vec::with_capacity(samples * bands);
        let mut rad = Vec::with_capacity(samples * bands);
        for b in 0..bands {
            for s in 0..samples {
                let x = s as f64 / samples as f64;
                dark.push((90.0 + 20.0 * (6.0 * x).sin() + b as f64 * 0.1) as f32);
                rad.push((0.5 + 0.25 * (3.0 * x + b as f64 * 0.01).cos().abs()) as f32);
            }
        }
        let reference = CaptureSettings {
            framerate: 249.0,
            exposure: 0.0078,
            gain: 1.0,
        };
        Radiometry {
            calib: CalibrationSet::new(samples, bands, dark, rad, reference)
                .expect("consistent synthetic calibration"),
            settings: CaptureSettings {
                exposure: 0.0039,
                ..reference
            },
        }
    }

    pub fn response(&self) -> f64 {
        (self.settings.exposure / self.calib.reference.exposure)
            * (self.settings.gain / self.calib.reference.gain)
    }
}

/// One simulated cube: its line poses and the ground point of every
/// sample's center ray.
#[derive(Debug, Clone)]
pub struct SimulatedCube {
    pub id: String,
    pub camera: Camera,
    pub line_times: Vec<f64>,
    pub track: PoseTrack,
    /// Line-major ground hits, `None` for rays that miss.
    pub hits: Vec<Option<[f64; 2]>>,
}

impl SimulatedCube {
    /// Poses are taken at the start of each line's exposure.
    pub fn capture(
        id: &str,
        camera: &Camera,
        log: &ProjectedLog,
        line_times: &[f64],
        ground: &GroundModel,
    ) -> Result<Self> {
        let track = log.interpolate(line_times, id)?;
        let rays: Vec<[f64; 3]> = (0..camera.samples).map(|s| camera.ray(s as f64 + 0.5)).collect();
        let mut hits = Vec::with_capacity(track.len() * camera.samples);
        for line in 0..track.len() {
            let pose = track.pose(line);
            hits.extend(rays.iter().map(|r| ground_hit(&pose, *r, ground)));
        }
        Ok(SimulatedCube {
            id: id.to_string(),
            camera: camera.clone(),
            line_times: line_times.to_vec(),
            track,
            hits,
        })
    }

    pub fn lines(&self) -> usize {
        self.track.len()
    }

    /// Scene values at the sample centers; `NaN` where the ray missed.
    pub fn scene_band(&self, scene: &SyntheticScene, band: usize) -> Vec<f32> {
        self.hits
            .iter()
            .map(|h| match h {
                Some([n, e]) => scene.band_value(*n, *e, band, self.camera.bands) as f32,
                None => f32::NAN,
            })
            .collect()
    }

    /// Raw digital numbers for `band`, with radiometry applied if given.
    pub fn raw_band(&self, scene: &SyntheticScene, band: usize, radiometry: Option<&Radiometry>) -> Vec<f32> {
        let mut v = self.scene_band(scene, band);
        if let Some(r) = radiometry {
            let response = r.response() as f32;
            let (dark, rad) = (r.calib.dark_line(band), r.calib.rad_line(band));
            let s = self.camera.samples;
            for (i, x) in v.iter_mut().enumerate() {
                *x = *x * response / rad[i % s] + dark[i % s];
            }
        }
        v
    }

    pub fn header(&self, data_type: DataType, radiometry: Option<&Radiometry>) -> CubeHeader {
        let mut h = CubeHeader::new(self.camera.samples, self.lines(), self.camera.bands, data_type);
        h.wavelengths = self.camera.wavelengths.clone();
        h.wavelength_units = Some("Nanometers".into());
        h.line_times = Some(self.line_times.clone());
        h.settings = Some(radiometry.map_or(
            CaptureSettings {
                framerate: 249.0,
                exposure: 0.0039,
                gain: 1.0,
            },
            |r| r.settings,
        ));
        h.description = Some(format!("synthetic capture {}", self.id));
        h.set_extra(FOV_KEY, format!("{}", self.camera.fov.theta_deg));
        h
    }

    /// Native-endian `f32` band-sequential bytes.
    pub fn raw_bytes(&self, scene: &SyntheticScene, radiometry: Option<&Radiometry>) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.hits.len() * self.camera.bands * 4);
        for b in 0..self.camera.bands {
            for v in self.raw_band(scene, b, radiometry) {
                bytes.extend_from_slice(&v.to_ne_bytes());
            }
        }
        bytes
    }

    /// An in-memory `f32` cube handle.
    pub fn to_handle(&self, scene: &SyntheticScene, radiometry: Option<&Radiometry>) -> Result<CubeHandle> {
        self.to_handle_with(scene, radiometry, |s| s)
    }

    /// Like [`to_handle`](Self::to_handle) with the byte source passed
    /// through `wrap`, e.g. to slow it down.
    pub fn to_handle_with(
        &self,
        scene: &SyntheticScene,
        radiometry: Option<&Radiometry>,
        wrap: impl FnOnce(Box<dyn ByteSource>) -> Box<dyn ByteSource>,
    ) -> Result<CubeHandle> {
        let header = self.header(DataType::F32, radiometry);
        let source = Box::new(MemorySource::new(self.id.clone(), self.raw_bytes(scene, radiometry)));
        Ok(CubeHandle::from_source(&self.id, header, wrap(source))?)
    }

    /// Writes the cube band by band to `path` (ENVI, `data_type`).
    pub fn write(
        &self,
        path: &Path,
        scene: &SyntheticScene,
        radiometry: Option<&Radiometry>,
        data_type: DataType,
    ) -> Result<(PathBuf, PathBuf)> {
        let mut w = CubeWriter::create(path, self.header(data_type, radiometry))?;
        for b in 0..self.camera.bands {
            let mut band = self.raw_band(scene, b, radiometry);
            for v in &mut band {
                if v.is_nan() {
                    *v = 0.0;
                }
            }
            w.write_band(&band)?;
        }
        w.finish().map_err(OracleError::from)
    }
}
