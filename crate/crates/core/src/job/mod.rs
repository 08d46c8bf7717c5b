//! Export jobs: configuration, validation and the load → mesh → render →
//! write pipeline.

mod collection;
mod config;
mod export;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use thiserror::Error;

use crate::calibration::{CalibrationError, CalibrationSet, IlluminationSpectrum};
use crate::cube_io::{read_pose_log, CubeError, CubeHandle};
use crate::geodesy::{GeodesyError, InsRecord};
use crate::mesh::MeshError;
use crate::raster::RasterError;

pub use collection::{resolve_fov, Collection, CollectionOptions, CHAIN_GAP_LINES, FOV_KEY};
pub use config::{CubeRange, GroundSetting, JobConfig, Wavelengths, DEFAULT_NOMINAL_AGL};
pub use export::{
    mask_path_for, output_wavelengths, ExportOptions, ExportReport, StageTimings, NED_ORIGIN_KEY,
};

#[derive(Debug, Error)]
pub enum JobError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Invalid(String),
    #[error("cancelled")]
    Cancelled,
}

impl From<RasterError> for JobError {
    fn from(e: RasterError) -> Self {
        match e {
            RasterError::Cancelled => JobError::Cancelled,
            RasterError::InvalidView(m) => JobError::Invalid(m),
        }
    }
}

pub type Result<T> = std::result::Result<T, JobError>;

/// Reads a cube list: one path per line, `#` comments, relative to the
/// list's directory.
pub fn read_cube_list(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect())
}

/// A configuration whose inputs have all been opened and checked.
#[derive(Debug)]
pub struct ValidatedJob {
    pub config: JobConfig,
    pub cubes: Vec<CubeHandle>,
    pub records: Vec<InsRecord>,
    pub calib: Option<Arc<CalibrationSet>>,
    pub illumination: Option<Arc<IlluminationSpectrum>>,
    pub output: PathBuf,
    pub gsd: f64,
}

/// Checks every option and input, reporting all problems at once rather
/// than stopping at the first.
pub fn validate_config(config: &JobConfig) -> std::result::Result<ValidatedJob, Vec<String>> {
    let mut errors = Vec::new();

    let mut paths = config.cube_paths.clone();
    if let Some(list) = &config.cubes {
        match read_cube_list(list) {
            Ok(p) => paths.extend(p),
            Err(e) => errors.push(format!("cube list {}: {e}", list.display())),
        }
    }
    if paths.is_empty() && config.cubes.is_none() {
        errors.push("no cubes given (cubes = <list file>)".into());
    } else if paths.is_empty() {
        errors.push("cube list is empty".into());
    }
    let mut cubes = Vec::new();
    for p in &paths {
        match CubeHandle::open(p) {
            Ok(c) => {
                if c.header().line_times.is_none() {
                    errors.push(format!("{}: header has no per-line timestamps (sc line times)", c.id()));
                }
                cubes.push(c);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }

    let records = match &config.poses {
        None => {
            errors.push("no pose log given (poses = <csv>)".into());
            Vec::new()
        }
        Some(p) => read_pose_log(p).unwrap_or_else(|e| {
            errors.push(e.to_string());
            Vec::new()
        }),
    };

    let gsd = match config.gsd {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => {
            errors.push(format!("gsd must be positive, got {g}"));
            0.0
        }
        None => {
            errors.push("no output ground sample distance given (gsd = <m>)".into());
            0.0
        }
    };
    let output = match &config.output {
        Some(o) => {
            let parent = o.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                errors.push(format!("output directory {} does not exist", parent.display()));
            }
            o.clone()
        }
        None => {
            errors.push("no output path given (output = <file>)".into());
            PathBuf::new()
        }
    };

    if let Some(r) = config.range {
        if r.first > r.last {
            errors.push(format!("range {}:{} is reversed; first must not exceed last", r.first, r.last));
        } else if !paths.is_empty() && r.last >= paths.len() {
            errors.push(format!("range {}:{} exceeds the {} cubes listed", r.first, r.last, paths.len()));
        }
    }
    if !(config.nominal_agl.is_finite() && config.nominal_agl > 0.0) {
        errors.push(format!("nominal_agl must be positive, got {}", config.nominal_agl));
    }
    if config.jobs == Some(0) {
        errors.push("jobs must be at least 1".into());
    }
    if let Some(f) = config.fov {
        if !(f > 0.0 && f < 180.0) {
            errors.push(format!("fov {f}° must be in (0, 180)"));
        }
    } else if let Some(c) = cubes.first() {
        if c.header().extra(FOV_KEY).is_none() {
            errors.push(format!("no fov given and {} has no `{FOV_KEY}` header key", c.id()));
        }
    }

    let calib = match &config.calib {
        Some(p) => match CalibrationSet::load(p) {
            Ok(c) => Some(Arc::new(c)),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        },
        None => None,
    };
    let illumination = match &config.illumination {
        Some(p) => match IlluminationSpectrum::load_csv(p) {
            Ok(i) => Some(Arc::new(i)),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        },
        None => None,
    };
    let mode = config.mode;
    if mode != crate::calibration::CalibrationMode::Raw && config.calib.is_none() {
        errors.push(format!("{} mode needs a calibration file (calib = <path>)", mode.as_str()));
    }
    if mode == crate::calibration::CalibrationMode::Reflectance && config.illumination.is_none() {
        errors.push("reflectance mode needs an illumination spectrum (illumination = <csv>)".into());
    }
    if let Some(c) = &calib {
        for cube in &cubes {
            if let Err(e) = crate::calibration::Calibrator::new(
                mode,
                cube.header(),
                cube.id(),
                Some(c.clone()),
                illumination.clone(),
            ) {
                errors.push(e.to_string());
            }
        }
    }

    if let (Wavelengths::List(list), Some(c)) = (&config.wavelengths, cubes.first()) {
        let w = &c.header().wavelengths;
        if let (Some(lo), Some(hi)) = (
            w.iter().copied().reduce(f64::min),
            w.iter().copied().reduce(f64::max),
        ) {
            for &target in list {
                if target < lo || target > hi {
                    let band = crate::calibration::nearest_band(w, target);
                    warn!(
                        "wavelength {target} nm is outside the sensor range [{lo}, {hi}] nm; using band {band} ({} nm)",
                        w[band]
                    );
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(ValidatedJob {
            config: config.clone(),
            cubes,
            records,
            calib,
            illumination,
            output,
            gsd,
        })
    } else {
        Err(errors)
    }
}

/// Validates `config`, builds the collection and writes the export.
pub fn run_export(
    config: &JobConfig,
    progress: &mut dyn FnMut(usize, usize),
    cancelled: &(dyn Fn() -> bool + Sync),
) -> Result<ExportReport> {
    let t = Instant::now();
    let job = validate_config(config).map_err(JobError::Config)?;
    if job.config.preload {
        let loaded = crate::cube_io::preload(&job.cubes)?;
        let n = loaded.iter().filter(|l| **l).count();
        info!("preloaded {n} of {} cubes", loaded.len());
    }
    let load = t.elapsed();

    let t = Instant::now();
    let opts = CollectionOptions {
        fov_deg: config.fov,
        ground: config.ground,
        nominal_agl: config.nominal_agl,
    };
    let mut collection = Collection::from_records(job.cubes, &job.records, &opts)?;
    collection.set_calibration(job.calib, job.illumination);
    let mesh = t.elapsed();

    let export = ExportOptions {
        gsd: job.gsd,
        wavelengths: config.wavelengths.clone(),
        mode: config.mode,
        range: config.range,
        no_data: config.no_data,
        data_type: config.data_type,
        mask: config.mask,
    };
    let mut report = collection.export(&export, &job.output, progress, cancelled)?;
    report.timings.load += load;
    report.timings.mesh += mesh;
    Ok(report)
}
