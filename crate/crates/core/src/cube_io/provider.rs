use std::fmt;
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::header::{resolve_pair, ByteOrder, CubeHeader, DataType, Interleave};
use super::source::{ByteSource, FileSource};
use super::{io_err, CubeError, Result};

/// One band of a cube as `f32`, line-major: `values[line * samples + sample]`.
#[derive(Debug, Clone)]
pub struct BandPlane {
    pub band: usize,
    pub samples: usize,
    pub lines: usize,
    values: Arc<Vec<f32>>,
}

impl BandPlane {
    pub fn new(band: usize, samples: usize, lines: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), samples * lines, "plane dims");
        BandPlane {
            band,
            samples,
            lines,
            values: Arc::new(values),
        }
    }

    #[inline]
    pub fn get(&self, line: usize, sample: usize) -> f32 {
        self.values[line * self.samples + sample]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

impl Deref for BandPlane {
    type Target = [f32];
    fn deref(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoStats {
    pub reads: u64,
    pub bytes: u64,
}

struct Inner {
    id: String,
    header_path: Option<PathBuf>,
    header: CubeHeader,
    source: Box<dyn ByteSource>,
    reads: AtomicU64,
    bytes: AtomicU64,
    cache: Mutex<Vec<Option<Arc<Vec<f32>>>>>,
}

/// Shared, cheaply clonable reference to one cube.
///
/// Opening a handle parses the header and stats the data file; no band
/// bytes are read until a band is requested. Band reads are safe from any
/// number of threads.
#[derive(Clone)]
pub struct CubeHandle {
    inner: Arc<Inner>,
}

impl fmt::Debug for CubeHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CubeHandle")
            .field("id", &self.inner.id)
            .field("source", &self.inner.source.describe())
            .finish_non_exhaustive()
    }
}

/// Parses a header and checks it against its data file's size.
pub fn read_header(path: &Path) -> Result<CubeHeader> {
    Ok(CubeHandle::open(path)?.header().clone())
}

impl CubeHandle {
    /// Opens `path`, which may name either the `.hdr` or the data file.
    pub fn open(path: &Path) -> Result<CubeHandle> {
        let (hdr, data) = resolve_pair(path)?;
        let text = std::fs::read_to_string(&hdr).map_err(io_err(&hdr))?;
        let header = CubeHeader::parse(&text, &hdr)?;
        let id = data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| data.display().to_string());
        let mut handle = Self::from_source(id, header, Box::new(FileSource::new(data)))?;
        Arc::get_mut(&mut handle.inner)
            .expect("fresh handle")
            .header_path = Some(hdr);
        Ok(handle)
    }

    pub fn from_source(
        id: impl Into<String>,
        header: CubeHeader,
        source: Box<dyn ByteSource>,
    ) -> Result<CubeHandle> {
        header.validate().map_err(CubeError::Invalid)?;
        check_size(&header, source.as_ref())?;
        let bands = header.bands;
        Ok(CubeHandle {
            inner: Arc::new(Inner {
                id: id.into(),
                header_path: None,
                header,
                source,
                reads: AtomicU64::new(0),
                bytes: AtomicU64::new(0),
                cache: Mutex::new(vec![None; bands]),
            }),
        })
    }

    /// Same cube metadata over different storage, e.g. a throttled or
    /// instrumented wrapper. Counters and cache start empty.
    pub fn with_source(&self, source: Box<dyn ByteSource>) -> Result<CubeHandle> {
        let mut h = Self::from_source(self.inner.id.clone(), self.inner.header.clone(), source)?;
        Arc::get_mut(&mut h.inner).expect("fresh handle").header_path =
            self.inner.header_path.clone();
        Ok(h)
    }

    pub fn id(&self) -> &str {
        &self.inner.id
    }

    pub fn header(&self) -> &CubeHeader {
        &self.inner.header
    }

    pub fn header_path(&self) -> Option<&Path> {
        self.inner.header_path.as_deref()
    }

    pub fn io_stats(&self) -> IoStats {
        IoStats {
            reads: self.inner.reads.load(Ordering::Relaxed),
            bytes: self.inner.bytes.load(Ordering::Relaxed),
        }
    }

    pub fn same_cube(&self, other: &CubeHandle) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    fn check_band(&self, band: usize) -> Result<()> {
        if band < self.inner.header.bands {
            Ok(())
        } else {
            Err(CubeError::BandOutOfRange {
                cube: self.inner.id.clone(),
                band,
                bands: self.inner.header.bands,
            })
        }
    }

    fn read_raw(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        self.inner.reads.fetch_add(1, Ordering::Relaxed);
        self.inner.bytes.fetch_add(buf.len() as u64, Ordering::Relaxed);
        self.inner
            .source
            .read_at(offset, buf)
            .map_err(|source| CubeError::Io {
                path: PathBuf::from(self.inner.source.describe()),
                source,
            })
    }

    /// Band `band`, from the cache when loaded there, otherwise from storage.
    /// A BSQ read is one contiguous range read.
    pub fn read_band(&self, band: usize) -> Result<BandPlane> {
        self.check_band(band)?;
        if let Some(p) = self.cached_band(band) {
            return Ok(p);
        }
        let values = self.read_uncached(band, Vec::new())?;
        let h = &self.inner.header;
        Ok(BandPlane::new(band, h.samples, h.lines, values))
    }

    /// Reads a band and keeps it in the handle's cache.
    pub fn load_band(&self, band: usize) -> Result<BandPlane> {
        let plane = self.read_band(band)?;
        self.cache_lock()[band] = Some(plane.values.clone());
        Ok(plane)
    }

    pub fn cached_band(&self, band: usize) -> Option<BandPlane> {
        let h = &self.inner.header;
        let values = self.cache_lock().get(band)?.clone()?;
        Some(BandPlane {
            band,
            samples: h.samples,
            lines: h.lines,
            values,
        })
    }

    pub fn is_cached(&self, band: usize) -> bool {
        self.cache_lock().get(band).is_some_and(Option::is_some)
    }

    pub fn release_band(&self, band: usize) {
        if let Some(slot) = self.cache_lock().get_mut(band) {
            *slot = None;
        }
    }

    pub fn release_all(&self) {
        self.cache_lock().iter_mut().for_each(|s| *s = None);
    }

    fn cache_lock(&self) -> std::sync::MutexGuard<'_, Vec<Option<Arc<Vec<f32>>>>> {
        self.inner.cache.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Loads every band into memory. Returns `Ok(false)` and releases what
    /// was loaded if memory cannot be reserved; reads then stay on demand.
    pub fn preload(&self) -> Result<bool> {
        check_size(&self.inner.header, self.inner.source.as_ref())?;
        let plane_len = self.inner.header.plane_len();
        for band in 0..self.inner.header.bands {
            if self.is_cached(band) {
                continue;
            }
            let mut buf = Vec::new();
            if buf.try_reserve_exact(plane_len).is_err() {
                log::warn!(
                    "{}: not enough memory to preload ({} bands of {} values); reading on demand",
                    self.inner.id,
                    self.inner.header.bands,
                    plane_len
                );
                self.release_all();
                return Ok(false);
            }
            let values = self.read_uncached(band, buf)?;
            self.cache_lock()[band] = Some(Arc::new(values));
        }
        Ok(true)
    }

    fn read_uncached(&self, band: usize, mut out: Vec<f32>) -> Result<Vec<f32>> {
        let h = &self.inner.header;
        let size = h.data_type.size();
        let base = h.header_offset as u64;
        out.clear();
        out.reserve_exact(h.plane_len());
        match h.interleave {
            Interleave::Bsq => {
                let mut bytes = vec![0u8; h.plane_bytes()];
                self.read_raw(base + (band * h.plane_bytes()) as u64, &mut bytes)?;
                decode_into(&bytes, h.data_type, h.byte_order, &mut out);
            }
            Interleave::Bil => {
                let row = h.samples * size;
                let mut bytes = vec![0u8; row];
                for line in 0..h.lines {
                    let off = base + ((line * h.bands + band) * row) as u64;
                    self.read_raw(off, &mut bytes)?;
                    decode_into(&bytes, h.data_type, h.byte_order, &mut out);
                }
            }
            Interleave::Bip => {
                let row = h.samples * h.bands * size;
                let mut bytes = vec![0u8; row];
                let mut one = Vec::with_capacity(1);
                for line in 0..h.lines {
                    self.read_raw(base + (line * row) as u64, &mut bytes)?;
                    for s in 0..h.samples {
                        let at = (s * h.bands + band) * size;
                        one.clear();
                        decode_into(&bytes[at..at + size], h.data_type, h.byte_order, &mut one);
                        out.push(one[0]);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn check_size(header: &CubeHeader, source: &dyn ByteSource) -> Result<()> {
    let path = PathBuf::from(source.describe());
    let actual = source.len().map_err(io_err(&path))?;
    let expected = header.header_offset as u64 + header.data_bytes();
    if actual != expected {
        return Err(CubeError::SizeMismatch {
            path,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Preloads a set of cubes. Every data file is checked before any band is
/// read; cubes that don't fit in memory fall back to on-demand reads.
/// Returns, per handle, whether it is now fully in memory.
pub fn preload(handles: &[CubeHandle]) -> Result<Vec<bool>> {
    for h in handles {
        check_size(&h.inner.header, h.inner.source.as_ref())?;
    }
    handles.iter().map(CubeHandle::preload).collect()
}

macro_rules! decode_as {
    ($bytes:expr, $order:expr, $out:expr, $t:ty) => {{
        const N: usize = std::mem::size_of::<$t>();
        let chunks = $bytes.chunks_exact(N);
        match $order {
            ByteOrder::Little => $out.extend(chunks.map(|c| {
                <$t>::from_le_bytes(c.try_into().expect("chunk size")) as f32
            })),
            ByteOrder::Big => $out.extend(chunks.map(|c| {
                <$t>::from_be_bytes(c.try_into().expect("chunk size")) as f32
            })),
        }
    }};
}

/// Appends the decoded values of `bytes` to `out`.
pub(crate) fn decode_into(bytes: &[u8], dt: DataType, order: ByteOrder, out: &mut Vec<f32>) {
    match dt {
        DataType::U8 => out.extend(bytes.iter().map(|&b| b as f32)),
        DataType::I16 => decode_as!(bytes, order, out, i16),
        DataType::U16 => decode_as!(bytes, order, out, u16),
        DataType::I32 => decode_as!(bytes, order, out, i32),
        DataType::U32 => decode_as!(bytes, order, out, u32),
        DataType::F32 => decode_as!(bytes, order, out, f32),
        DataType::F64 => decode_as!(bytes, order, out, f64),
    }
}
