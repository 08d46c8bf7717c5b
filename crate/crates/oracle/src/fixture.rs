use std::path::{Path, PathBuf};

use swathcube::cube_io::{write_pose_log, ByteSource, DataType};
use swathcube::geodesy::Pose;
use swathcube::job::{Collection, CHAIN_GAP_LINES};

use crate::capture::{Camera, Radiometry, SimulatedCube};
use crate::flight::{AttitudeNoise, FlightPlan, SyntheticFlight};
use crate::scene::{spectral_gain, SyntheticScene};
use crate::{OracleError, Result};

/// A flight, a camera and a scene.
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub plan: FlightPlan,
    pub samples: usize,
    pub bands: usize,
    pub fov_deg: f64,
    pub scene: SyntheticScene,
    /// Inject dark, rad and response so calibrated modes recover the scene.
    pub radiometry: bool,
    pub data_type: DataType,
}

/// Nominal camera and flight: 900 samples, 47.5° lens, 40 m above ground
/// at 10 m/s, 249 lines/s.
pub const NOMINAL_SAMPLES: usize = 900;
pub const NOMINAL_FOV_DEG: f64 = 47.5;

impl FixtureSpec {
    /// Ten 900×1000 cubes: five lawnmower passes of two cubes each, ±5°
    /// attitude noise.
    pub fn desk_scale(bands: usize) -> Self {
        FixtureSpec {
            plan: FlightPlan {
                passes: 5,
                lines_per_pass: 2000,
                cubes_per_pass: 2,
                pass_spacing: 30.0,
                noise: Some(AttitudeNoise::uniform(5.0, 42)),
                ..FlightPlan::default()
            },
            samples: NOMINAL_SAMPLES,
            bands,
            fov_deg: NOMINAL_FOV_DEG,
            scene: default_scene(),
            radiometry: false,
            data_type: DataType::U16,
        }
    }

    /// One 900×1000×300 cube.
    pub fn full_band() -> Self {
        FixtureSpec {
            plan: FlightPlan {
                noise: Some(AttitudeNoise::uniform(2.0, 7)),
                ..FlightPlan::default()
            },
            bands: 300,
            ..Self::desk_scale(300)
        }
    }

    pub fn camera(&self) -> Camera {
        Camera::new(self.samples, self.bands, self.fov_deg)
    }
}

/// Stripes with a slow gradient, in plausible digital-number range.
pub fn default_scene() -> SyntheticScene {
    SyntheticScene::Stripes {
        period: 2.0,
        normal_deg: 0.0,
        low: 800.0,
        high: 2400.0,
    }
}

/// A captured survey held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticSurvey {
    pub flight: SyntheticFlight,
    pub camera: Camera,
    pub cubes: Vec<SimulatedCube>,
}

impl SyntheticSurvey {
    pub fn capture(plan: &FlightPlan, camera: &Camera) -> Result<Self> {
        let flight = SyntheticFlight::generate(plan);
        let log = flight.log();
        let ground = flight.ground();
        let cubes = flight
            .cubes
            .iter()
            .enumerate()
            .map(|(i, c)| SimulatedCube::capture(&cube_name(i), camera, &log, &c.line_times, &ground))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticSurvey {
            flight,
            camera: camera.clone(),
            cubes,
        })
    }

    /// Pose of cube `i + 1`'s first line when the two cubes are one
    /// continuous recording.
    pub fn next_pose(&self, i: usize) -> Option<Pose> {
        let (a, b) = (&self.cubes[i], self.cubes.get(i + 1)?);
        let period = 1.0 / self.flight.plan.line_rate;
        let gap = b.line_times[0] - a.line_times[a.lines() - 1];
        (gap > 0.0 && gap <= CHAIN_GAP_LINES * period).then(|| b.track.pose(0))
    }

    /// The survey as a renderable collection over in-memory cubes, in the
    /// flight's own frame.
    pub fn collection(&self, scene: &SyntheticScene, radiometry: Option<&Radiometry>) -> Result<Collection> {
        self.collection_with(scene, radiometry, |s| s)
    }

    /// [`collection`](Self::collection) with every cube's byte source passed
    /// through `wrap`.
    pub fn collection_with(
        &self,
        scene: &SyntheticScene,
        radiometry: Option<&Radiometry>,
        wrap: impl Fn(Box<dyn ByteSource>) -> Box<dyn ByteSource>,
    ) -> Result<Collection> {
        let handles = self
            .cubes
            .iter()
            .map(|c| c.to_handle_with(scene, radiometry, &wrap))
            .collect::<Result<Vec<_>>>()?;
        let mut c = Collection::from_log(
            handles,
            &self.flight.log(),
            self.flight.frame,
            self.camera.fov,
            self.flight.ground(),
        )?;
        if let Some(r) = radiometry {
            c.set_calibration(Some(std::sync::Arc::new(r.calib.clone())), None);
        }
        Ok(c)
    }
}

pub fn cube_name(i: usize) -> String {
    format!("cube_{i:03}")
}

/// Paths of a fixture written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFiles {
    pub dir: PathBuf,
    pub cubes: Vec<PathBuf>,
    /// One cube file name per line, in capture order.
    pub cube_list: PathBuf,
    pub poses: PathBuf,
    pub calib: Option<PathBuf>,
    pub illumination: Option<PathBuf>,
    /// Seconds of simulated line capture.
    pub capture_duration: f64,
}

/// Simulates the survey cube by cube and writes ENVI cubes, the cube list,
/// a geodetic pose log and (with radiometry) calibration and illumination
/// files into `dir`.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<FixtureFiles> {
    std::fs::create_dir_all(dir).map_err(|e| OracleError::io(dir.to_path_buf(), e))?;
    let flight = SyntheticFlight::generate(&spec.plan);
    let camera = spec.camera();
    let log = flight.log();
    let ground = flight.ground();
    let radiometry = spec.radiometry.then(|| Radiometry::synthetic(spec.samples, spec.bands));
    let mut cubes = Vec::new();
    for (i, timing) in flight.cubes.iter().enumerate() {
        let cube = SimulatedCube::capture(&cube_name(i), &camera, &log, &timing.line_times, &ground)?;
        let path = dir.join(format!("{}.raw", cube_name(i)));
        cube.write(&path, &spec.scene, radiometry.as_ref(), spec.data_type)?;
        cubes.push(path);
    }
    let list = dir.join("cubes.txt");
    let names: String = (0..cubes.len()).map(|i| format!("{}.raw\n", cube_name(i))).collect();
    std::fs::write(&list, names).map_err(|e| OracleError::io(list.clone(), e))?;
    let poses = dir.join("poses.csv");
    write_pose_log(&poses, &flight.records())?;
    let (calib, illumination) = match &radiometry {
        Some(r) => {
            let calib = dir.join("calib.raw");
            r.calib.save(&calib)?;
            let illum = dir.join("illumination.csv");
            let mut text = String::from("wavelength_nm,radiance\n");
            for (b, w) in camera.wavelengths.iter().enumerate() {
                text.push_str(&format!("{w},{}\n", 1000.0 * spectral_gain(b, spec.bands)));
            }
            std::fs::write(&illum, text).map_err(|e| OracleError::io(illum.clone(), e))?;
            (Some(calib), Some(illum))
        }
        None => (None, None),
    };
    Ok(FixtureFiles {
        dir: dir.to_path_buf(),
        cubes,
        cube_list: list,
        poses,
        calib,
        illumination,
        capture_duration: flight.capture_duration(),
    })
}
