use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::header::{header_path_for, ByteOrder, CubeHeader, DataType, Interleave};
use super::{io_err, CubeError, Result};

/// Streams a band-sequential cube to disk one band at a time.
///
/// The header is written by [`finish`](Self::finish). Dropping an unfinished
/// writer, or calling [`abort`](Self::abort), deletes both files.
#[derive(Debug)]
pub struct CubeWriter {
    header: CubeHeader,
    data_path: PathBuf,
    header_path: PathBuf,
    out: Option<BufWriter<File>>,
    bands_written: usize,
    scratch: Vec<u8>,
}

impl CubeWriter {
    /// `data_path` is the raw data file; the header goes to `<stem>.hdr`.
    pub fn create(data_path: &Path, header: CubeHeader) -> Result<CubeWriter> {
        if header.interleave != Interleave::Bsq {
            return Err(CubeError::Invalid(format!(
                "only BSQ output is supported, got {}",
                header.interleave.as_str()
            )));
        }
        header.validate().map_err(CubeError::Invalid)?;
        if header.header_offset > 0 {
            return Err(CubeError::Invalid("header offset must be 0 when writing".into()));
        }
        let header_path = header_path_for(data_path);
        if header_path == data_path {
            return Err(CubeError::Invalid(format!(
                "{}: data file must not use the .hdr extension",
                data_path.display()
            )));
        }
        if let Some(dir) = data_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = File::create(data_path).map_err(io_err(data_path))?;
        Ok(CubeWriter {
            header,
            data_path: data_path.to_path_buf(),
            header_path,
            out: Some(BufWriter::with_capacity(1 << 20, file)),
            bands_written: 0,
            scratch: Vec::new(),
        })
    }

    pub fn header(&self) -> &CubeHeader {
        &self.header
    }

    pub fn bands_written(&self) -> usize {
        self.bands_written
    }

    /// Appends the next band. Integer types are rounded and saturated. A
    /// wrong-sized plane aborts the write and deletes the partial files.
    pub fn write_band(&mut self, values: &[f32]) -> Result<()> {
        if self.out.is_none() {
            return Err(CubeError::Invalid(format!(
                "{}: writer was aborted",
                self.data_path.display()
            )));
        }
        let expected = self.header.plane_len();
        if values.len() != expected || self.bands_written >= self.header.bands {
            let message = if values.len() != expected {
                format!(
                    "{}: band {} has {} values, expected {expected}",
                    self.data_path.display(),
                    self.bands_written,
                    values.len()
                )
            } else {
                format!(
                    "{}: more than the declared {} bands written",
                    self.data_path.display(),
                    self.header.bands
                )
            };
            self.discard();
            return Err(CubeError::Invalid(message));
        }
        self.scratch.clear();
        encode_into(values, self.header.data_type, self.header.byte_order, &mut self.scratch);
        let out = self.out.as_mut().expect("writer is open");
        if let Err(e) = out.write_all(&self.scratch) {
            self.discard();
            return Err(io_err(&self.data_path)(e));
        }
        self.bands_written += 1;
        Ok(())
    }

    /// Flushes data, writes the header, and returns `(header, data)` paths.
    pub fn finish(mut self) -> Result<(PathBuf, PathBuf)> {
        if self.bands_written != self.header.bands {
            let message = format!(
                "{}: {} of {} bands written",
                self.data_path.display(),
                self.bands_written,
                self.header.bands
            );
            self.discard();
            return Err(CubeError::Invalid(message));
        }
        let out = self.out.take().expect("writer is open");
        let flushed = out
            .into_inner()
            .map_err(|e| e.into_error())
            .and_then(|_| std::fs::write(&self.header_path, self.header.to_text()));
        if let Err(e) = flushed {
            self.discard();
            return Err(io_err(&self.data_path)(e));
        }
        Ok((self.header_path.clone(), self.data_path.clone()))
    }

    pub fn abort(mut self) {
        self.discard();
    }

    fn discard(&mut self) {
        if self.out.take().is_some() || self.bands_written > 0 {
            let _ = std::fs::remove_file(&self.data_path);
            let _ = std::fs::remove_file(&self.header_path);
        }
        self.bands_written = 0;
    }
}

impl Drop for CubeWriter {
    fn drop(&mut self) {
        if self.out.is_some() {
            log::warn!("{}: unfinished cube discarded", self.data_path.display());
            self.discard();
        }
    }
}

/// Writes a whole cube from in-memory planes.
pub fn write_cube(data_path: &Path, header: CubeHeader, bands: &[Vec<f32>]) -> Result<(PathBuf, PathBuf)> {
    if bands.len() != header.bands {
        return Err(CubeError::Invalid(format!(
            "{} planes given for a {}-band header",
            bands.len(),
            header.bands
        )));
    }
    let mut w = CubeWriter::create(data_path, header)?;
    for b in bands {
        w.write_band(b)?;
    }
    w.finish()
}

macro_rules! encode_as {
    ($values:expr, $order:expr, $out:expr, $conv:expr) => {{
        match $order {
            ByteOrder::Little => {
                for &v in $values {
                    $out.extend_from_slice(&$conv(v).to_le_bytes());
                }
            }
            ByteOrder::Big => {
                for &v in $values {
                    $out.extend_from_slice(&$conv(v).to_be_bytes());
                }
            }
        }
    }};
}

// `as` from float saturates at the integer bounds and maps NaN to 0
pub(crate) fn encode_into(values: &[f32], dt: DataType, order: ByteOrder, out: &mut Vec<u8>) {
    out.reserve(values.len() * dt.size());
    match dt {
        DataType::U8 => out.extend(values.iter().map(|v| v.round() as u8)),
        DataType::I16 => encode_as!(values, order, out, |v: f32| v.round() as i16),
        DataType::U16 => encode_as!(values, order, out, |v: f32| v.round() as u16),
        DataType::I32 => encode_as!(values, order, out, |v: f32| v.round() as i32),
        DataType::U32 => encode_as!(values, order, out, |v: f32| v.round() as u32),
        DataType::F32 => encode_as!(values, order, out, |v: f32| v),
        DataType::F64 => encode_as!(values, order, out, |v: f32| v as f64),
    }
}
