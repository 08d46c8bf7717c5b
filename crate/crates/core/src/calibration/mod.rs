//! Radiometric calibration of raw digital numbers and display stretch.
//!
//! A calibrated value is `(raw − dark) · rad / response`, computed in `f32`
//! in that order. Disabling calibration fixes `dark = 0` and `rad = 1`.

mod stretch;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::cube_io::{CaptureSettings, CubeError, CubeHandle, CubeHeader, DataType};

pub use stretch::{
    apply_stretch, nearest_band, percentile_exact, stretch_bounds, Histogram, StretchBounds,
    StretchMethod, StretchMode, HISTOGRAM_BINS, STRETCH_HIGH_PERCENT, STRETCH_LOW_PERCENT,
};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Illumination {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("capture settings must be positive (framerate {framerate}, exposure {exposure}, gain {gain})")]
    NonPositiveSettings {
        framerate: f64,
        exposure: f64,
        gain: f64,
    },
    #[error("{what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CalibrationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    /// Digital numbers as recorded.
    #[default]
    Raw,
    /// Scaled to the calibration reference exposure and gain.
    Relative,
    Radiance,
    /// Radiance divided by the scene illumination spectrum.
    Reflectance,
}

impl CalibrationMode {
    pub fn needs_calibration(self) -> bool {
        matches!(self, CalibrationMode::Radiance | CalibrationMode::Reflectance)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationMode::Raw => "raw",
            CalibrationMode::Relative => "relative",
            CalibrationMode::Radiance => "radiance",
            CalibrationMode::Reflectance => "reflectance",
        }
    }
}

impl std::str::FromStr for CalibrationMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(CalibrationMode::Raw),
            "relative" => Ok(CalibrationMode::Relative),
            "radiance" => Ok(CalibrationMode::Radiance),
            "reflectance" => Ok(CalibrationMode::Reflectance),
            other => Err(format!(
                "unknown calibration mode {other:?} (raw, relative, radiance, reflectance)"
            )),
        }
    }
}

/// Dark line and radiance coefficients, `bands × samples`, with the capture
/// settings they were measured at.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    samples: usize,
    bands: usize,
    dark: Vec<f32>,
    rad: Vec<f32>,
    pub reference: CaptureSettings,
    /// Radiance units, carried as opaque text.
    pub units: Option<String>,
}

const UNITS_KEY: &str = "sc calib units";

impl CalibrationSet {
    /// `dark` and `rad` are band-major: `[band * samples + sample]`.
    pub fn new(
        samples: usize,
        bands: usize,
        dark: Vec<f32>,
        rad: Vec<f32>,
        reference: CaptureSettings,
    ) -> Result<Self> {
        for (what, v) in [("dark", &dark), ("rad", &rad)] {
            if v.len() != samples * bands {
                return Err(CalibrationError::Dimension {
                    what: format!("{what} coefficients"),
                    expected: samples * bands,
                    actual: v.len(),
                });
            }
        }
        if let Some(i) = rad.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(CalibrationError::Invalid(format!(
                "radiance coefficient at band {}, sample {} is {}; must be positive",
                i / samples,
                i % samples,
                rad[i]
            )));
        }
        if dark.iter().any(|d| !d.is_finite()) {
            return Err(CalibrationError::Invalid("dark line contains non-finite values".into()));
        }
        check_settings(&reference)?;
        Ok(CalibrationSet {
            samples,
            bands,
            dark,
            rad,
            reference,
            units: None,
        })
    }

    /// Reads a calibration cube: one band per camera band, two lines (dark,
    /// then rad), reference settings in the capture-setting header keys.
    pub fn load(path: &Path) -> Result<Self> {
        let cube = CubeHandle::open(path)?;
        let h = cube.header();
        let file_err = |message: String| CalibrationError::File {
            path: path.to_path_buf(),
            message,
        };
        if h.lines != 2 {
            return Err(file_err(format!(
                "calibration cube must have 2 lines (dark, rad), found {}",
                h.lines
            )));
        }
        let reference = h
            .settings
            .ok_or_else(|| file_err("missing reference settings (sc exposure, sc framerate)".into()))?;
        let (s, k) = (h.samples, h.bands);
        let mut dark = Vec::with_capacity(s * k);
        let mut rad = Vec::with_capacity(s * k);
        for band in 0..k {
            let plane = cube.read_band(band)?;
            dark.extend_from_slice(&plane[..s]);
            rad.extend_from_slice(&plane[s..]);
        }
        let mut set = Self::new(s, k, dark, rad, reference).map_err(|e| file_err(e.to_string()))?;
        set.units = h.extra(UNITS_KEY).map(str::to_string);
        Ok(set)
    }

    pub fn save(&self, data_path: &Path) -> Result<()> {
        let mut h = CubeHeader::new(self.samples, 2, self.bands, DataType::F32);
        h.settings = Some(self.reference);
        if let Some(u) = &self.units {
            h.set_extra(UNITS_KEY, u.clone());
        }
        let planes: Vec<Vec<f32>> = (0..self.bands)
            .map(|b| [self.dark_line(b), self.rad_line(b)].concat())
            .collect();
        crate::cube_io::write_cube(data_path, h, &planes)?;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dark_line(&self, band: usize) -> &[f32] {
        &self.dark[band * self.samples..(band + 1) * self.samples]
    }

    pub fn rad_line(&self, band: usize) -> &[f32] {
        &self.rad[band * self.samples..(band + 1) * self.samples]
    }

    /// Errors unless this set fits a cube with the given dims.
    pub fn check_cube(&self, cube: &str, samples: usize, bands: usize) -> Result<()> {
        if samples != self.samples {
            return Err(CalibrationError::Dimension {
                what: format!("{cube}: samples vs calibration"),
                expected: self.samples,
                actual: samples,
            });
        }
        if bands != self.bands {
            return Err(CalibrationError::Dimension {
                what: format!("{cube}: bands vs calibration"),
                expected: self.bands,
                actual: bands,
            });
        }
        Ok(())
    }
}

fn check_settings(s: &CaptureSettings) -> Result<()> {
    let ok = |v: f64| v > 0.0 && v.is_finite();
    if ok(s.framerate) && ok(s.exposure) && ok(s.gain) {
        Ok(())
    } else {
        Err(CalibrationError::NonPositiveSettings {
            framerate: s.framerate,
            exposure: s.exposure,
            gain: s.gain,
        })
    }
}

/// Camera response relative to the calibration reference:
/// `(exposure / exposure_ref) · (gain / gain_ref)`. Framerate is ignored.
pub fn compute_response(settings: &CaptureSettings, reference: &CaptureSettings) -> Result<f64> {
    check_settings(settings)?;
    check_settings(reference)?;
    Ok((settings.exposure / reference.exposure) * (settings.gain / reference.gain))
}

/// Per-line response factors for one cube.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve(Vec<f32>);

impl ResponseCurve {
    pub fn uniform(lines: usize, value: f32) -> Self {
        ResponseCurve(vec![value; lines])
    }

    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(CalibrationError::Invalid(format!(
                "response must be positive, got {v}"
            )));
        }
        Ok(ResponseCurve(values))
    }

    /// Constant curve from a cube's capture settings.
    pub fn from_settings(
        lines: usize,
        settings: &CaptureSettings,
        reference: &CaptureSettings,
    ) -> Result<Self> {
        Ok(Self::uniform(lines, compute_response(settings, reference)? as f32))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scene illumination radiance per band.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationSpectrum {
    pub wavelengths: Vec<f64>,
    pub radiance: Vec<f32>,
}

impl IlluminationSpectrum {
    pub fn new(wavelengths: Vec<f64>, radiance: Vec<f32>) -> Result<Self> {
        if wavelengths.len() != radiance.len() {
            return Err(CalibrationError::Dimension {
                what: "illumination wavelengths vs values".into(),
                expected: wavelengths.len(),
                actual: radiance.len(),
            });
        }
        if let Some(i) = radiance.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(CalibrationError::Invalid(format!(
                "illumination at band {i} is {}; must be positive",
                radiance[i]
            )));
        }
        Ok(IlluminationSpectrum {
            wavelengths,
            radiance,
        })
    }

    /// Two columns, `wavelength_nm,radiance`, one row per band. A header
    /// row is optional.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| CalibrationError::Illumination {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| err(0, e.to_string()))?;
        let (mut wl, mut rad) = (Vec::new(), Vec::new());
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            if row.len() < 2 {
                return Err(err(line, "expected `wavelength_nm,radiance`".into()));
            }
            let (w, r) = (row[0].parse::<f64>(), row[1].parse::<f32>());
            match (w, r) {
                (Ok(w), Ok(r)) => {
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(err(line, format!("illumination must be positive, got {r}")));
                    }
                    wl.push(w);
                    rad.push(r);
                }
                _ if i == 0 => continue,
                _ => return Err(err(line, format!("not a number: {:?}", row.as_slice()))),
            }
        }
        if rad.is_empty() {
            return Err(err(0, "empty illumination spectrum".into()));
        }
        Self::new(wl, rad)
    }

    pub fn len(&self) -> usize {
        self.radiance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radiance.is_empty()
    }
}

/// `radiance / illum[band]`. Not clamped.
#[inline]
pub fn to_reflectance(radiance: f32, band: usize, illum: &IlluminationSpectrum) -> f32 {
    radiance / illum.radiance[band]
}

/// One calibrated value. In raw mode `calib` and `response` are ignored; in
/// relative mode only `response` is used. Panics in radiance modes without
/// a calibration set (validated earlier).
#[inline]
pub fn calibrate(
    raw: f32,
    band: usize,
    line: usize,
    sample: usize,
    calib: Option<&CalibrationSet>,
    response: &ResponseCurve,
    mode: CalibrationMode,
) -> f32 {
    let (dark, rad, resp) = match mode {
        CalibrationMode::Raw => (0.0, 1.0, 1.0),
        CalibrationMode::Relative => (0.0, 1.0, response.0[line]),
        CalibrationMode::Radiance | CalibrationMode::Reflectance => {
            let c = calib.expect("radiance mode requires a calibration set");
            let i = band * c.samples + sample;
            (c.dark[i], c.rad[i], response.0[line])
        }
    };
    (raw - dark) * rad / resp
}

/// Everything needed to calibrate one cube, shared across bands and tiles.
#[derive(Debug, Clone)]
pub struct Calibrator {
    pub mode: CalibrationMode,
    calib: Option<Arc<CalibrationSet>>,
    illumination: Option<Arc<IlluminationSpectrum>>,
    response: ResponseCurve,
}

impl Calibrator {
    /// Checks that the inputs the mode needs are present and fit the cube.
    pub fn new(
        mode: CalibrationMode,
        header: &CubeHeader,
        cube: &str,
        calib: Option<Arc<CalibrationSet>>,
        illumination: Option<Arc<IlluminationSpectrum>>,
    ) -> Result<Self> {
        let response = match (mode, &calib, &header.settings) {
            (CalibrationMode::Raw, ..) => ResponseCurve::uniform(header.lines, 1.0),
            (_, Some(c), Some(s)) => ResponseCurve::from_settings(header.lines, s, &c.reference)?,
            (CalibrationMode::Relative, None, _) => {
                return Err(CalibrationError::Invalid(format!(
                    "{cube}: relative mode needs a calibration file for the reference settings"
                )))
            }
            (_, _, None) => {
                return Err(CalibrationError::Invalid(format!(
                    "{cube}: header has no capture settings (sc exposure, sc framerate)"
                )))
            }
            (_, None, _) => {
                return Err(CalibrationError::Invalid(format!(
                    "{cube}: {} mode needs a calibration file",
                    mode.as_str()
                )))
            }
        };
        if let Some(c) = &calib {
            if mode.needs_calibration() {
                c.check_cube(cube, header.samples, header.bands)?;
            }
        }
        if mode == CalibrationMode::Reflectance {
            match &illumination {
                None => {
                    return Err(CalibrationError::Invalid(format!(
                        "{cube}: reflectance mode needs an illumination spectrum"
                    )))
                }
                Some(i) if i.len() != header.bands => {
                    return Err(CalibrationError::Dimension {
                        what: format!("{cube}: illumination spectrum length vs bands"),
                        expected: header.bands,
                        actual: i.len(),
                    })
                }
                _ => {}
            }
        }
        Ok(Calibrator {
            mode,
            calib,
            illumination,
            response,
        })
    }

    /// Identity calibration for `lines` lines.
    pub fn raw(lines: usize) -> Self {
        Calibrator {
            mode: CalibrationMode::Raw,
            calib: None,
            illumination: None,
            response: ResponseCurve::uniform(lines, 1.0),
        }
    }

    pub fn response(&self) -> &ResponseCurve {
        &self.response
    }

    /// Per-band view with the mode's fixed terms resolved.
    pub fn band(&self, band: usize) -> BandCalibration<'_> {
        let coeffs = match (self.mode.needs_calibration(), &self.calib) {
            (true, Some(c)) => Some((c.dark_line(band), c.rad_line(band))),
            _ => None,
        };
        let illum = match self.mode {
            CalibrationMode::Reflectance => self.illumination.as_ref().map(|i| i.radiance[band]),
            _ => None,
        };
        BandCalibration {
            coeffs,
            response: match self.mode {
                CalibrationMode::Raw => None,
                _ => Some(self.response.values()),
            },
            illum,
        }
    }
}

/// Calibration for one band. `apply` matches [`calibrate`] bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct BandCalibration<'a> {
    coeffs: Option<(&'a [f32], &'a [f32])>,
    response: Option<&'a [f32]>,
    illum: Option<f32>,
}

impl BandCalibration<'_> {
    #[inline]
    pub fn apply(&self, raw: f32, line: usize, sample: usize) -> f32 {
        let (dark, rad) = match self.coeffs {
            Some((d, r)) => (d[sample], r[sample]),
            None => (0.0, 1.0),
        };
        let resp = match self.response {
            Some(r) => r[line],
            None => 1.0,
        };
        let v = (raw - dark) * rad / resp;
        match self.illum {
            Some(i) => v / i,
            None => v,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs.is_none() && self.response.is_none() && self.illum.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> CaptureSettings {
        CaptureSettings {
            framerate: 249.0,
            exposure: 0.0078,
            gain: 1.0,
        }
    }

    #[test]
    fn response_examples() {
        let r = reference();
        assert_eq!(compute_response(&r, &r).unwrap(), 1.0);
        let doubled = CaptureSettings {
            exposure: 2.0 * r.exposure,
            ..r
        };
        assert_eq!(compute_response(&doubled, &r).unwrap(), 2.0);
        let fixture = CaptureSettings {
            exposure: 0.0039,
            ..r
        };
        assert_eq!(compute_response(&fixture, &r).unwrap(), 0.5);
        let bad = CaptureSettings { gain: 0.0, ..r };
        assert!(compute_response(&bad, &r).is_err());
    }

    fn set() -> CalibrationSet {
        // 2 samples, 2 bands
        CalibrationSet::new(2, 2, vec![100.0, 90.0, 80.0, 70.0], vec![2.0, 1.5, 0.5, 0.25], reference()).unwrap()
    }

    #[test]
    fn direct_arithmetic() {
        let c = set();
        let one = ResponseCurve::uniform(3, 1.0);
        assert_eq!(calibrate(150.0, 0, 0, 0, Some(&c), &one, CalibrationMode::Radiance), 100.0);
        assert_eq!(calibrate(100.0, 0, 2, 0, Some(&c), &one, CalibrationMode::Radiance), 0.0);
        assert_eq!(calibrate(150.0, 0, 0, 0, Some(&c), &one, CalibrationMode::Raw), 150.0);
        // below dark stays negative
        assert_eq!(calibrate(60.0, 1, 0, 1, Some(&c), &one, CalibrationMode::Radiance), -2.5);
    }

    #[test]
    fn band_view_matches_free_function() {
        let c = Arc::new(set());
        let mut h = CubeHeader::new(2, 3, 2, DataType::U16);
        h.settings = Some(CaptureSettings {
            exposure: 0.0039,
            ..reference()
        });
        for mode in [CalibrationMode::Raw, CalibrationMode::Relative, CalibrationMode::Radiance] {
            let cal = Calibrator::new(mode, &h, "t", Some(c.clone()), None).unwrap();
            for band in 0..2 {
                let b = cal.band(band);
                for line in 0..3 {
                    for sample in 0..2 {
                        let raw = 123.0 + line as f32 * 7.0;
                        let expect = calibrate(raw, band, line, sample, Some(&c), cal.response(), mode);
                        assert_eq!(b.apply(raw, line, sample).to_bits(), expect.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn mode_requirements() {
        let h = CubeHeader::new(2, 3, 2, DataType::U16);
        assert!(Calibrator::new(CalibrationMode::Raw, &h, "t", None, None).is_ok());
        assert!(Calibrator::new(CalibrationMode::Radiance, &h, "t", None, None).is_err());
        let mut h2 = h.clone();
        h2.settings = Some(reference());
        let c = Arc::new(set());
        assert!(Calibrator::new(CalibrationMode::Reflectance, &h2, "t", Some(c.clone()), None).is_err());
        let mut h3 = h2.clone();
        h3.samples = 3;
        assert!(Calibrator::new(CalibrationMode::Radiance, &h3, "t", Some(c), None).is_err());
    }

    #[test]
    fn rejects_non_positive_rad() {
        assert!(CalibrationSet::new(1, 1, vec![0.0], vec![0.0], reference()).is_err());
    }

    #[test]
    fn illumination_rejects_zero() {
        assert!(IlluminationSpectrum::new(vec![500.0, 600.0], vec![1.0, 0.0]).is_err());
    }
}
