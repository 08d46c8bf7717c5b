//! ENVI datacube and pose-log I/O, and the [`CubeHandle`] provider through
//! which every consumer reads band data.
//!
//! A handle is created from the header alone. Band bytes are read on demand
//! from a [`ByteSource`], which counts every read so tests can assert on the
//! access pattern.

mod header;
mod poselog;
mod provider;
mod source;
mod writer;

use std::path::PathBuf;

use thiserror::Error;

pub use header::{
    header_path_for, resolve_pair, ByteOrder, CaptureSettings, CubeHeader, DataType, Interleave,
    MapInfo,
};
pub use poselog::{read_pose_log, write_pose_log, POSE_LOG_COLUMNS};
pub use provider::{preload, read_header, BandPlane, CubeHandle, IoStats};
pub use source::{ByteSource, FileSource, MemorySource};
pub use writer::{write_cube, CubeWriter};

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Header {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: required key `{key}` is missing", path.display())]
    MissingKey { path: PathBuf, key: String },
    #[error("{}:{line}: unsupported ENVI data type {code}", path.display())]
    UnsupportedDataType { path: PathBuf, line: usize, code: u32 },
    #[error("{}: no data file found next to the header", header.display())]
    MissingData { header: PathBuf },
    #[error("{}: data file is {actual} bytes, header implies {expected}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{cube}: band {band} out of range (cube has {bands})")]
    BandOutOfRange {
        cube: String,
        band: usize,
        bands: usize,
    },
    #[error("{}:{line}: {message}", path.display())]
    PoseLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CubeError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CubeError {
    let path = path.into();
    move |source| CubeError::Io { path, source }
}
