use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationMode;
use crate::cube_io::DataType;

/// Output wavelengths: every band of the first cube, or nearest bands to a
/// list of targets in nanometers.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Wavelengths {
    #[default]
    All,
    List(Vec<f64>),
}

impl FromStr for Wavelengths {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Wavelengths::All);
        }
        let list = s
            .split(',')
            .map(|w| {
                let w = w.trim();
                w.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| format!("wavelength {w:?} is not a positive number"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if list.is_empty() {
            return Err("empty wavelength list".into());
        }
        Ok(Wavelengths::List(list))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WavelengthsRepr {
    List(Vec<f64>),
    Text(String),
}

impl Serialize for Wavelengths {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Wavelengths::All => "all".serialize(s),
            Wavelengths::List(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Wavelengths {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match WavelengthsRepr::deserialize(d)? {
            WavelengthsRepr::List(v) if !v.is_empty() => Ok(Wavelengths::List(v)),
            WavelengthsRepr::List(_) => Err(serde::de::Error::custom("empty wavelength list")),
            WavelengthsRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Ground plane altitude: estimated from the pose log, or given.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GroundSetting {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for GroundSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GroundSetting::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(GroundSetting::Fixed)
            .ok_or_else(|| format!("ground must be `auto` or a height in meters, got {s:?}"))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GroundRepr {
    Number(f64),
    Text(String),
}

impl Serialize for GroundSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GroundSetting::Auto => "auto".serialize(s),
            GroundSetting::Fixed(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for GroundSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match GroundRepr::deserialize(d)? {
            GroundRepr::Number(v) => Ok(GroundSetting::Fixed(v)),
            GroundRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Inclusive range of cube indices in capture order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeRange {
    pub first: usize,
    pub last: usize,
}

impl CubeRange {
    pub fn contains(&self, i: usize) -> bool {
        (self.first..=self.last).contains(&i)
    }
}

impl FromStr for CubeRange {
    type Err = String;
    /// `a:b`, inclusive.
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("range must look like `first:last`, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("range bound {v:?} is not a cube index"))
        };
        Ok(CubeRange {
            first: parse(a)?,
            last: parse(b)?,
        })
    }
}

pub const DEFAULT_NOMINAL_AGL: f64 = 40.0;

fn default_agl() -> f64 {
    DEFAULT_NOMINAL_AGL
}

fn default_data_type() -> DataType {
    DataType::F32
}

/// Everything needed for one export run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    /// Text file listing cube paths in capture order, one per line.
    #[serde(default)]
    pub cubes: Option<PathBuf>,
    /// Cube paths given directly; used when `cubes` is absent.
    #[serde(default)]
    pub cube_paths: Vec<PathBuf>,
    #[serde(default)]
    pub poses: Option<PathBuf>,
    #[serde(default)]
    pub calib: Option<PathBuf>,
    #[serde(default)]
    pub illumination: Option<PathBuf>,
    #[serde(default)]
    pub wavelengths: Wavelengths,
    #[serde(default)]
    pub gsd: Option<f64>,
    #[serde(default)]
    pub ground: GroundSetting,
    #[serde(default = "default_agl")]
    pub nominal_agl: f64,
    /// Full field of view in degrees; falls back to the cube header.
    #[serde(default)]
    pub fov: Option<f64>,
    #[serde(default)]
    pub range: Option<CubeRange>,
    #[serde(default)]
    pub mode: CalibrationMode,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub no_data: f32,
    #[serde(default = "default_data_type", with = "data_type_name")]
    pub data_type: DataType,
    /// Also write a `<output>_mask` coverage cube.
    #[serde(default)]
    pub mask: bool,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Read every band into memory before rendering.
    #[serde(default)]
    pub preload: bool,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            cubes: None,
            cube_paths: Vec::new(),
            poses: None,
            calib: None,
            illumination: None,
            wavelengths: Wavelengths::All,
            gsd: None,
            ground: GroundSetting::Auto,
            nominal_agl: DEFAULT_NOMINAL_AGL,
            fov: None,
            range: None,
            mode: CalibrationMode::Raw,
            output: None,
            no_data: 0.0,
            data_type: DataType::F32,
            mask: false,
            jobs: None,
            preload: false,
        }
    }
}

pub(crate) fn parse_data_type(s: &str) -> Result<DataType, String> {
    Ok(match s.trim().to_ascii_lowercase().as_str() {
        "u8" | "1" => DataType::U8,
        "i16" | "2" => DataType::I16,
        "i32" | "3" => DataType::I32,
        "f32" | "4" => DataType::F32,
        "f64" | "5" => DataType::F64,
        "u16" | "12" => DataType::U16,
        "u32" | "13" => DataType::U32,
        other => return Err(format!("unknown data type {other:?} (u8, i16, u16, i32, u32, f32, f64)")),
    })
}

pub(crate) fn data_type_label(dt: DataType) -> &'static str {
    match dt {
        DataType::U8 => "u8",
        DataType::I16 => "i16",
        DataType::I32 => "i32",
        DataType::F32 => "f32",
        DataType::F64 => "f64",
        DataType::U16 => "u16",
        DataType::U32 => "u32",
    }
}

mod data_type_name {
    use super::*;

    pub fn serialize<S: serde::Serializer>(dt: &DataType, s: S) -> Result<S::Ok, S::Error> {
        data_type_label(*dt).serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<DataType, D::Error> {
        let s = String::deserialize(d)?;
        parse_data_type(&s).map_err(serde::de::Error::custom)
    }
}

impl JobConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<JobConfig, Vec<String>> {
        let mut cfg = JobConfig::default();
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            if let Err(e) = cfg.set(key.trim(), value.trim(), base) {
                errors.push(format!("line {}: {e}", i + 1));
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    pub fn load(path: &Path) -> Result<JobConfig, Vec<String>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![format!("{}: {e}", path.display())])?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|errs| {
            errs.into_iter()
                .map(|e| format!("{}: {e}", path.display()))
                .collect()
        })
    }

    /// Sets one option by name, as in the config file.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let path = || base.join(value);
        let num = |what: &str| {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{what}: {value:?} is not a number"))
        };
        match key.replace('-', "_").as_str() {
            "cubes" => self.cubes = Some(path()),
            "cube" => self.cube_paths.push(path()),
            "poses" => self.poses = Some(path()),
            "calib" => self.calib = Some(path()),
            "illumination" => self.illumination = Some(path()),
            "wavelengths" => self.wavelengths = value.parse()?,
            "gsd" => self.gsd = Some(num("gsd")?),
            "ground" => self.ground = value.parse()?,
            "nominal_agl" => self.nominal_agl = num("nominal_agl")?,
            "fov" => self.fov = Some(num("fov")?),
            "range" => self.range = Some(value.parse()?),
            "mode" => self.mode = value.parse()?,
            "output" => self.output = Some(path()),
            "no_data" => self.no_data = num("no_data")? as f32,
            "data_type" => self.data_type = parse_data_type(value)?,
            "mask" => self.mask = parse_bool(value)?,
            "preload" => self.preload = parse_bool(value)?,
            "jobs" => {
                self.jobs = Some(
                    value
                        .parse::<usize>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| format!("jobs: {value:?} is not a positive integer"))?,
                )
            }
            other => return Err(format!("unknown option `{other}`")),
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}
