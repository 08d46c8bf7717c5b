use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CubeError, Result};
use crate::geodesy::Hemisphere;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    Bsq,
    Bil,
    Bip,
}

impl Interleave {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsq" => Some(Interleave::Bsq),
            "bil" => Some(Interleave::Bil),
            "bip" => Some(Interleave::Bip),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        }
    }
}

/// ENVI `data type` codes understood by the reader and writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
    U16,
    U32,
}

impl DataType {
    pub fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            1 => DataType::U8,
            2 => DataType::I16,
            3 => DataType::I32,
            4 => DataType::F32,
            5 => DataType::F64,
            12 => DataType::U16,
            13 => DataType::U32,
            _ => return None,
        })
    }

    pub fn code(self) -> u32 {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::I32 => 3,
            DataType::F32 => 4,
            DataType::F64 => 5,
            DataType::U16 => 12,
            DataType::U32 => 13,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::U32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    /// Largest representable value, used as the white point of unstretched
    /// display. Float types are assumed normalized to 1.
    pub fn full_scale(self) -> f32 {
        match self {
            DataType::U8 => u8::MAX as f32,
            DataType::I16 => i16::MAX as f32,
            DataType::U16 => u16::MAX as f32,
            DataType::I32 => i32::MAX as f32,
            DataType::U32 => u32::MAX as f32,
            DataType::F32 | DataType::F64 => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    pub fn native() -> Self {
        if cfg!(target_endian = "big") {
            ByteOrder::Big
        } else {
            ByteOrder::Little
        }
    }

    pub fn code(self) -> u32 {
        match self {
            ByteOrder::Little => 0,
            ByteOrder::Big => 1,
        }
    }
}

/// Camera settings a cube was captured with.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CaptureSettings {
    /// Hz
    pub framerate: f64,
    /// seconds
    pub exposure: f64,
    /// linear factor
    pub gain: f64,
}

/// UTM georeference for ENVI `map info`. `easting` / `northing` are the
/// upper-left corner of the upper-left pixel. Headers are written with the
/// tie point at that pixel's center, reference pixel (1.5, 1.5).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MapInfo {
    pub easting: f64,
    pub northing: f64,
    pub pixel_x: f64,
    pub pixel_y: f64,
    pub zone: u8,
    pub hemisphere: Hemisphere,
}

impl MapInfo {
    /// Coordinates of the center of pixel (0, 0).
    pub fn first_pixel_center(&self) -> (f64, f64) {
        (
            self.easting + self.pixel_x / 2.0,
            self.northing - self.pixel_y / 2.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub header_offset: usize,
    pub interleave: Interleave,
    pub data_type: DataType,
    pub byte_order: ByteOrder,
    pub description: Option<String>,
    pub wavelengths: Vec<f64>,
    pub wavelength_units: Option<String>,
    pub settings: Option<CaptureSettings>,
    pub line_times: Option<Vec<f64>>,
    pub map_info: Option<MapInfo>,
    pub data_ignore_value: Option<f64>,
    /// Keys not interpreted above, preserved in order (lowercase key, raw value).
    pub extra: Vec<(String, String)>,
}

impl CubeHeader {
    /// A BSQ header with native byte order and nothing optional set.
    pub fn new(samples: usize, lines: usize, bands: usize, data_type: DataType) -> Self {
        CubeHeader {
            samples,
            lines,
            bands,
            header_offset: 0,
            interleave: Interleave::Bsq,
            data_type,
            byte_order: ByteOrder::native(),
            description: None,
            wavelengths: Vec::new(),
            wavelength_units: None,
            settings: None,
            line_times: None,
            map_info: None,
            data_ignore_value: None,
            extra: Vec::new(),
        }
    }

    pub fn plane_len(&self) -> usize {
        self.samples * self.lines
    }

    pub fn plane_bytes(&self) -> usize {
        self.plane_len() * self.data_type.size()
    }

    pub fn data_bytes(&self) -> u64 {
        (self.plane_bytes() as u64) * self.bands as u64
    }

    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_extra(&mut self, key: &str, value: String) {
        match self.extra.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.extra.push((key.to_string(), value)),
        }
    }

    /// Internal consistency checks that don't need the data file.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.samples == 0 || self.lines == 0 || self.bands == 0 {
            return Err("samples, lines and bands must be positive".into());
        }
        if !self.wavelengths.is_empty() {
            if self.wavelengths.len() != self.bands {
                return Err(format!(
                    "wavelength list has {} entries but bands = {}",
                    self.wavelengths.len(),
                    self.bands
                ));
            }
            if self.wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
                return Err("wavelengths must be strictly increasing".into());
            }
        }
        if let Some(times) = &self.line_times {
            if times.len() != self.lines {
                return Err(format!(
                    "sc line times has {} entries but lines = {}",
                    times.len(),
                    self.lines
                ));
            }
        }
        if let Some(s) = &self.settings {
            if !(s.framerate > 0.0 && s.exposure > 0.0 && s.gain > 0.0) {
                return Err("capture settings must be positive".into());
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<CubeHeader> {
        let entries = tokenize(text, path)?;
        let err = |line: usize, message: String| CubeError::Header {
            path: path.to_path_buf(),
            line,
            message,
        };
        let find = |key: &str| entries.iter().find(|e| e.key == key);
        let required = |key: &str| {
            find(key).ok_or_else(|| CubeError::MissingKey {
                path: path.to_path_buf(),
                key: key.to_string(),
            })
        };
        let count = |key: &str| -> Result<usize> {
            let e = required(key)?;
            e.value
                .trim()
                .parse::<usize>()
                .map_err(|_| err(e.line, format!("{key}: expected a non-negative integer, got {:?}", e.value)))
        };

        let samples = count("samples")?;
        let lines = count("lines")?;
        let bands = count("bands")?;
        let header_offset = match find("header offset") {
            Some(_) => count("header offset")?,
            None => 0,
        };

        let dt = required("data type")?;
        let code: u32 = dt
            .value
            .trim()
            .parse()
            .map_err(|_| err(dt.line, format!("data type: not an integer: {:?}", dt.value)))?;
        let data_type = DataType::from_code(code).ok_or(CubeError::UnsupportedDataType {
            path: path.to_path_buf(),
            line: dt.line,
            code,
        })?;

        let il = required("interleave")?;
        let interleave = Interleave::parse(il.value.trim())
            .ok_or_else(|| err(il.line, format!("unknown interleave {:?}", il.value)))?;

        let bo = required("byte order")?;
        let byte_order = match bo.value.trim() {
            "0" => ByteOrder::Little,
            "1" => ByteOrder::Big,
            other => return Err(err(bo.line, format!("byte order must be 0 or 1, got {other:?}"))),
        };

        let float_list = |e: &Entry| -> Result<Vec<f64>> {
            list_items(&e.value)
                .into_iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| err(e.line, format!("{}: not a number: {s:?}", e.key)))
                })
                .collect()
        };
        let float = |key: &str| -> Result<Option<f64>> {
            match find(key) {
                None => Ok(None),
                Some(e) => e
                    .value
                    .trim()
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| err(e.line, format!("{key}: not a number: {:?}", e.value))),
            }
        };

        let wavelengths = match find("wavelength") {
            Some(e) => float_list(e)?,
            None => Vec::new(),
        };
        let line_times = match find("sc line times") {
            Some(e) => Some(float_list(e)?),
            None => None,
        };
        let settings = match (float("sc framerate")?, float("sc exposure")?, float("sc gain")?) {
            (None, None, None) => None,
            (Some(framerate), Some(exposure), gain) => Some(CaptureSettings {
                framerate,
                exposure,
                gain: gain.unwrap_or(1.0),
            }),
            _ => {
                let line = find("sc framerate")
                    .or_else(|| find("sc exposure"))
                    .or_else(|| find("sc gain"))
                    .map_or(0, |e| e.line);
                return Err(err(line, "sc framerate and sc exposure must be given together".into()));
            }
        };
        let map_info = match find("map info") {
            Some(e) => Some(parse_map_info(e).map_err(|m| err(e.line, m))?),
            None => None,
        };

        const KNOWN: &[&str] = &[
            "samples",
            "lines",
            "bands",
            "header offset",
            "data type",
            "interleave",
            "byte order",
            "wavelength",
            "wavelength units",
            "description",
            "sc line times",
            "sc framerate",
            "sc exposure",
            "sc gain",
            "map info",
            "data ignore value",
            "file type",
        ];
        let header = CubeHeader {
            samples,
            lines,
            bands,
            header_offset,
            interleave,
            data_type,
            byte_order,
            description: find("description").map(|e| strip_braces(&e.value).trim().to_string()),
            wavelengths,
            wavelength_units: find("wavelength units").map(|e| e.value.trim().to_string()),
            settings,
            line_times,
            map_info,
            data_ignore_value: float("data ignore value")?,
            extra: entries
                .iter()
                .filter(|e| !KNOWN.contains(&e.key.as_str()))
                .map(|e| (e.key.clone(), e.value.clone()))
                .collect(),
        };
        if let Err(message) = header.validate() {
            let line = if message.starts_with("wavelength") {
                find("wavelength").map_or(0, |e| e.line)
            } else if message.starts_with("sc line") {
                find("sc line times").map_or(0, |e| e.line)
            } else {
                0
            };
            return Err(err(line, message));
        }
        if interleave == Interleave::Bip {
            log::warn!(
                "{}: BIP interleave; band reads are strided and may be slow",
                path.display()
            );
        }
        Ok(header)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("ENVI\n");
        if let Some(d) = &self.description {
            let _ = writeln!(out, "description = {{{d}}}");
        }
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "lines = {}", self.lines);
        let _ = writeln!(out, "bands = {}", self.bands);
        let _ = writeln!(out, "header offset = {}", self.header_offset);
        out.push_str("file type = ENVI Standard\n");
        let _ = writeln!(out, "data type = {}", self.data_type.code());
        let _ = writeln!(out, "interleave = {}", self.interleave.as_str());
        let _ = writeln!(out, "byte order = {}", self.byte_order.code());
        if let Some(u) = &self.wavelength_units {
            let _ = writeln!(out, "wavelength units = {u}");
        }
        if !self.wavelengths.is_empty() {
            let _ = writeln!(out, "wavelength = {{{}}}", join(&self.wavelengths));
        }
        if let Some(m) = &self.map_info {
            let hemi = match m.hemisphere {
                Hemisphere::North => "North",
                Hemisphere::South => "South",
            };
            let (e, n) = m.first_pixel_center();
            let _ = writeln!(
                out,
                "map info = {{UTM, 1.5, 1.5, {e}, {n}, {}, {}, {}, {hemi}, WGS-84}}",
                m.pixel_x, m.pixel_y, m.zone
            );
        }
        if let Some(v) = self.data_ignore_value {
            let _ = writeln!(out, "data ignore value = {v}");
        }
        if let Some(s) = &self.settings {
            let _ = writeln!(out, "sc framerate = {}", s.framerate);
            let _ = writeln!(out, "sc exposure = {}", s.exposure);
            let _ = writeln!(out, "sc gain = {}", s.gain);
        }
        if let Some(t) = &self.line_times {
            let _ = writeln!(out, "sc line times = {{{}}}", join(t));
        }
        for (k, v) in &self.extra {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 12);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v}");
    }
    s
}

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

fn tokenize(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let err = |line: usize, message: String| CubeError::Header {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.by_ref().find(|(_, l)| !l.trim().is_empty()) {
        Some((_, l)) if l.trim() == "ENVI" => {}
        Some((n, _)) => return Err(err(n, "missing ENVI magic on the first line".into())),
        None => return Err(err(0, "empty header".into())),
    }
    let mut entries = Vec::new();
    while let Some((n, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(n, format!("expected `key = value`, got {line:?}")));
        };
        let key = key.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase();
        let mut value = value.trim().to_string();
        if value.starts_with('{') {
            while !value.contains('}') {
                match lines.next() {
                    Some((_, more)) => {
                        value.push(' ');
                        value.push_str(more.trim());
                    }
                    None => return Err(err(n, format!("unterminated {{ list for {key}"))),
                }
            }
        }
        entries.push(Entry {
            key,
            value,
            line: n,
        });
    }
    Ok(entries)
}

fn strip_braces(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .unwrap_or(v)
}

fn list_items(v: &str) -> Vec<&str> {
    strip_braces(v)
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_map_info(e: &Entry) -> std::result::Result<MapInfo, String> {
    let items = list_items(&e.value);
    if items.len() < 9 {
        return Err(format!("map info needs at least 9 fields, got {}", items.len()));
    }
    if !items[0].eq_ignore_ascii_case("utm") {
        return Err(format!("unsupported map projection {:?}", items[0]));
    }
    let num = |i: usize| {
        items[i]
            .parse::<f64>()
            .map_err(|_| format!("map info field {i} is not a number: {:?}", items[i]))
    };
    let (ref_x, ref_y) = (num(1)?, num(2)?);
    let (pixel_x, pixel_y) = (num(5)?, num(6)?);
    let zone = items[7]
        .parse::<u8>()
        .map_err(|_| format!("bad UTM zone {:?}", items[7]))?;
    let hemisphere = if items[8].to_ascii_lowercase().starts_with('n') {
        Hemisphere::North
    } else {
        Hemisphere::South
    };
    // normalize any reference pixel to the (1, 1) corner convention
    Ok(MapInfo {
        easting: num(3)? - (ref_x - 1.0) * pixel_x,
        northing: num(4)? + (ref_y - 1.0) * pixel_y,
        pixel_x,
        pixel_y,
        zone,
        hemisphere,
    })
}

/// `<stem>.hdr` next to a data file (`cube.raw` → `cube.hdr`, `cube` → `cube.hdr`).
pub fn header_path_for(data: &Path) -> PathBuf {
    data.with_extension("hdr")
}

/// Locates the (header, data) pair for a path naming either file.
pub fn resolve_pair(path: &Path) -> Result<(PathBuf, PathBuf)> {
    let is_hdr = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("hdr"));
    if is_hdr {
        let stem = path.with_extension("");
        let candidates = ["", "raw", "img", "bsq", "dat", "bil", "bip"];
        for ext in candidates {
            let c = if ext.is_empty() {
                stem.clone()
            } else {
                stem.with_extension(ext)
            };
            if c.is_file() {
                return Ok((path.to_path_buf(), c));
            }
        }
        return Err(CubeError::MissingData {
            header: path.to_path_buf(),
        });
    }
    let mut appended = path.as_os_str().to_owned();
    appended.push(".hdr");
    let appended = PathBuf::from(appended);
    for h in [header_path_for(path), appended] {
        if h.is_file() {
            return Ok((h, path.to_path_buf()));
        }
    }
    Err(CubeError::Io {
        path: header_path_for(path),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no ENVI header found"),
    })
}
