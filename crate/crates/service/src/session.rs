use std::collections::{BTreeMap, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use swathcube::calibration::{
    stretch_bounds, CalibrationMode, Calibrator, Histogram, StretchBounds, StretchMethod, StretchMode,
    HISTOGRAM_BINS,
};
use swathcube::geodesy::NedFrame;
use swathcube::job::{run_export, Collection, CubeRange, JobConfig, JobError};
use swathcube::mesh::Bounds;
use swathcube::raster::{PixelBuffer, ViewWindow, COVERED, PENDING, TILE_SIZE};
use tokio::sync::broadcast;

use crate::cache::LruCache;
use crate::loader::{BandStatus, Loader};
use crate::{Event, ServiceError};

type Result<T> = std::result::Result<T, ServiceError>;

pub type RenderHook = Arc<dyn Fn(u64) + Send + Sync>;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_zoom: u32,
    pub cache_bytes: usize,
    pub loader_threads: usize,
    /// Concurrent tile renders.
    pub tile_workers: usize,
    /// Start loading the default bands immediately.
    pub autoload: bool,
    /// Defaults (cube list, pose log, calibration) merged into export
    /// requests.
    pub base_job: Option<JobConfig>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_zoom: 24,
            cache_bytes: 256 << 20,
            loader_threads: 2,
            tile_workers: std::thread::available_parallelism().map_or(2, |n| n.get()),
            autoload: true,
            base_job: None,
        }
    }
}

/// What a tile shows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// One (gray) or three (RGB) wavelengths, nm.
    pub wavelengths: Vec<f64>,
    pub mode: CalibrationMode,
    pub stretch: StretchMode,
    /// Fixed display bounds per channel; `None` follows the histogram.
    pub stretch_bounds: Option<Vec<(f32, f32)>>,
    pub ground_altitude: f64,
    pub range: Option<CubeRange>,
}

/// A partial [`RenderParams`] update. `stretch_bounds: null` clears fixed
/// bounds; an absent field leaves them alone.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsUpdate {
    pub wavelengths: Option<Vec<f64>>,
    pub mode: Option<CalibrationMode>,
    pub stretch: Option<StretchMode>,
    #[serde(default, with = "double_option")]
    pub stretch_bounds: Option<Option<Vec<(f32, f32)>>>,
    pub ground_altitude: Option<f64>,
    #[serde(default, with = "double_option")]
    pub range: Option<Option<CubeRange>>,
}

mod double_option {
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<Option<T>>, D::Error> {
        Option::<T>::deserialize(d).map(Some)
    }
}

/// Consistent view of the session for one request.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub generation: u64,
    pub params: RenderParams,
    pub collection: Arc<Collection>,
    pub calibrators: Arc<Vec<Calibrator>>,
    pub selection: Arc<Vec<usize>>,
    /// Bounds from the last applied histogram.
    pub auto_bounds: Option<Vec<(f32, f32)>>,
    pub stretch: StretchBounds,
    params_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TileKey {
    z: u32,
    tx: i64,
    ty: i64,
    params: u64,
    epoch: u64,
}

/// A rendered 256×256 tile.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub png: Vec<u8>,
    pub rgba: Vec<u8>,
    pub covered: usize,
    pub pending: usize,
    pub uncovered: usize,
}

impl Tile {
    /// `X-Coverage` header value.
    pub fn coverage_header(&self) -> String {
        format!(
            "covered={}; pending={}; uncovered={}",
            self.covered, self.pending, self.uncovered
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TileStats {
    pub rendered: u64,
    pub cancelled: u64,
    pub cache_hits: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CubeInfo {
    pub index: usize,
    pub id: String,
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub wavelengths: Vec<f64>,
    /// Summary over the bands currently displayed.
    pub status: BandStatus,
    pub band_status: BTreeMap<usize, BandStatus>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PyramidInfo {
    pub bounds: Bounds,
    pub tile_size: usize,
    pub max_zoom: u32,
    pub level0_pixel_size: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub generation: u64,
    pub params: RenderParams,
    pub stretch: StretchBounds,
    /// Footprint bounds of the selected cubes, local NED meters.
    pub bounds: Bounds,
    pub pyramid: PyramidInfo,
    pub frame: NedFrame,
    pub ground_estimate: Option<f64>,
    pub calibration: bool,
    pub illumination: bool,
    pub cubes: Vec<CubeInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsAccepted {
    pub generation: u64,
    pub params: RenderParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelHistogram {
    pub min: f32,
    pub max: f32,
    pub total: u64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramResponse {
    /// Generation the histogram was computed at, or the new one if its
    /// bounds were applied.
    pub generation: u64,
    pub channels: Vec<ChannelHistogram>,
    pub bounds: Option<StretchBounds>,
    pub applied: bool,
}

/// Inclusive tile range at one zoom level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRange {
    pub z: u32,
    pub tx0: i64,
    pub ty0: i64,
    pub tx1: i64,
    pub ty1: i64,
}

impl std::str::FromStr for TileRange {
    type Err = String;
    /// `z/tx0/ty0/tx1/ty1`
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let p: Vec<&str> = s.split(['/', ',']).collect();
        let bad = || format!("viewport {s:?}: expected z/tx0/ty0/tx1/ty1");
        if p.len() != 5 {
            return Err(bad());
        }
        let z = p[0].trim().parse().map_err(|_| bad())?;
        let n: Vec<i64> = p[1..]
            .iter()
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<std::result::Result<_, _>>()?;
        if n[2] < n[0] || n[3] < n[1] {
            return Err(format!("viewport {s:?}: empty tile range"));
        }
        Ok(TileRange {
            z,
            tx0: n[0],
            ty0: n[1],
            tx1: n[2],
            ty1: n[3],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobStatus {
    pub id: u64,
    pub state: JobState,
    pub done: usize,
    pub total: usize,
    pub output: Option<PathBuf>,
    pub error: Option<String>,
    pub timings: Option<String>,
}

/// Largest histogram window, in pixels.
const MAX_HISTOGRAM_PIXELS: usize = 4096 * 4096;

/// Viewer state shared by all requests.
pub struct Session {
    config: ServiceConfig,
    pyramid: Bounds,
    state: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    generation: AtomicU64,
    loader: Arc<Loader>,
    events: broadcast::Sender<Event>,
    cache: Mutex<LruCache<TileKey, Tile>>,
    hook: RwLock<Option<RenderHook>>,
    rendered: AtomicU64,
    cancelled: AtomicU64,
    cache_hits: AtomicU64,
    tile_permits: tokio::sync::Semaphore,
    jobs: Arc<Mutex<BTreeMap<u64, JobStatus>>>,
    next_job: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn default_wavelengths(c: &Collection) -> Vec<f64> {
    let h = c.cubes()[0].header();
    match (h.wavelengths.is_empty(), h.bands >= 3) {
        (false, true) => vec![640.0, 550.0, 460.0],
        (false, false) => vec![h.wavelengths[0]],
        (true, true) => vec![2.0, 1.0, 0.0],
        (true, false) => vec![0.0],
    }
}

fn full_scale(c: &Collection, mode: CalibrationMode) -> f32 {
    match mode {
        CalibrationMode::Reflectance => 1.0,
        _ => c.cubes()[0].header().data_type.full_scale(),
    }
}

impl Session {
    pub fn new(collection: Collection, config: ServiceConfig) -> Result<Arc<Session>> {
        if collection.cubes().is_empty() {
            return Err(ServiceError::BadRequest("collection has no cubes".into()));
        }
        let pyramid = collection.bounds(None).map_err(ServiceError::from_job)?;
        let params = RenderParams {
            wavelengths: default_wavelengths(&collection),
            mode: CalibrationMode::Raw,
            stretch: StretchMode::Common,
            stretch_bounds: None,
            ground_altitude: collection.ground().altitude,
            range: None,
        };
        let calibrators = collection.calibrators(params.mode).map_err(ServiceError::from_job)?;
        let selection = collection.selected(None).map_err(ServiceError::from_job)?;
        let (events, _) = broadcast::channel(1024);
        let loader = Loader::start(collection.cubes().len(), config.loader_threads, events.clone());
        let mut snap = Snapshot {
            generation: 1,
            params,
            collection: Arc::new(collection),
            calibrators: Arc::new(calibrators),
            selection: Arc::new(selection),
            auto_bounds: None,
            stretch: StretchBounds::full_scale(1, 1.0),
            params_hash: 0,
        };
        finish_snapshot(&mut snap);
        let session = Arc::new(Session {
            pyramid,
            state: RwLock::new(Arc::new(snap)),
            writer: Mutex::new(()),
            generation: AtomicU64::new(1),
            loader,
            events,
            cache: Mutex::new(LruCache::new(config.cache_bytes)),
            hook: RwLock::new(None),
            rendered: AtomicU64::new(0),
            cancelled: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            tile_permits: tokio::sync::Semaphore::new(config.tile_workers.max(1)),
            jobs: Arc::new(Mutex::new(BTreeMap::new())),
            next_job: AtomicU64::new(1),
            config,
        });
        if session.config.autoload {
            session.request_bands(&session.snapshot());
        }
        Ok(session)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.state.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn generation(&self) -> u64 {
        self.generation.load(Ordering::Acquire)
    }

    pub fn pyramid(&self) -> &Bounds {
        &self.pyramid
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    pub fn band_status(&self, cube: usize, band: usize) -> BandStatus {
        self.loader.status(cube, band)
    }

    /// Called with the generation at the start of every uncached tile
    /// render. For instrumentation.
    pub fn set_render_hook(&self, hook: Option<RenderHook>) {
        *self.hook.write().unwrap_or_else(|e| e.into_inner()) = hook;
    }

    pub fn stats(&self) -> TileStats {
        TileStats {
            rendered: self.rendered.load(Ordering::Relaxed),
            cancelled: self.cancelled.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    pub fn cached_tiles(&self) -> usize {
        lock(&self.cache).len()
    }

    /// Blocks until no band is loading or `timeout` passes; true if idle.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let end = Instant::now() + timeout;
        while self.loader.busy() {
            if Instant::now() > end {
                return false;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        true
    }

    /// Queues every band the snapshot displays.
    pub fn request_bands(&self, snap: &Snapshot) {
        let c = &snap.collection;
        for &cube in snap.selection.iter() {
            for &w in &snap.params.wavelengths {
                let b = c.band_index(cube, w);
                self.loader.request(cube, b, &c.cubes()[cube]);
            }
        }
    }

    pub fn metadata(&self) -> Metadata {
        let snap = self.snapshot();
        let c = &snap.collection;
        let statuses = self.loader.statuses();
        let cubes = c
            .cubes()
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let hd = h.header();
                let shown: HashSet<usize> = snap.params.wavelengths.iter().map(|&w| c.band_index(i, w)).collect();
                let st: Vec<BandStatus> = shown
                    .iter()
                    .map(|b| statuses[i].get(b).copied().unwrap_or(BandStatus::NotLoaded))
                    .collect();
                let status = if st.iter().all(|s| *s == BandStatus::Ready) {
                    BandStatus::Ready
                } else if st.contains(&BandStatus::Failed) {
                    BandStatus::Failed
                } else if st.contains(&BandStatus::Loading) {
                    BandStatus::Loading
                } else {
                    BandStatus::NotLoaded
                };
                CubeInfo {
                    index: i,
                    id: h.id().to_string(),
                    samples: hd.samples,
                    lines: hd.lines,
                    bands: hd.bands,
                    wavelengths: hd.wavelengths.clone(),
                    status,
                    band_status: statuses[i].clone(),
                }
            })
            .collect();
        Metadata {
            generation: snap.generation,
            params: snap.params.clone(),
            stretch: snap.stretch.clone(),
            bounds: c.bounds(snap.params.range).unwrap_or(self.pyramid),
            pyramid: PyramidInfo {
                bounds: self.pyramid,
                tile_size: TILE_SIZE,
                max_zoom: self.config.max_zoom,
                level0_pixel_size: ViewWindow::tile_pixel_size(&self.pyramid, 0),
            },
            frame: *c.frame(),
            ground_estimate: c.ground_estimate(),
            calibration: c.has_calibration(),
            illumination: c.has_illumination(),
            cubes,
        }
    }

    /// Applies a partial update atomically: either every field is accepted
    /// and a new generation starts, or nothing changes.
    pub fn set_params(&self, update: ParamsUpdate) -> Result<ParamsAccepted> {
        let _w = lock(&self.writer);
        let cur = self.snapshot();
        let mut p = cur.params.clone();
        if let Some(w) = update.wavelengths {
            p.wavelengths = w;
        }
        if let Some(m) = update.mode {
            p.mode = m;
        }
        if let Some(s) = update.stretch {
            p.stretch = s;
        }
        if let Some(b) = update.stretch_bounds {
            p.stretch_bounds = b;
        }
        if let Some(g) = update.ground_altitude {
            p.ground_altitude = g;
        }
        if let Some(r) = update.range {
            p.range = r;
        }

        let bad = |m: String| ServiceError::BadRequest(m);
        if !(p.wavelengths.len() == 1 || p.wavelengths.len() == 3) {
            return Err(bad(format!("{} wavelengths given; expected 1 or 3", p.wavelengths.len())));
        }
        if p.wavelengths.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(bad("wavelengths must be finite and non-negative".into()));
        }
        if let Some(b) = &p.stretch_bounds {
            if b.len() != p.wavelengths.len() {
                return Err(bad(format!("{} stretch bounds for {} channels", b.len(), p.wavelengths.len())));
            }
            if b.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi) {
                return Err(bad("stretch bounds must be finite with low <= high".into()));
            }
        }
        if !p.ground_altitude.is_finite() {
            return Err(bad("ground altitude must be finite".into()));
        }
        let collection = if p.ground_altitude != cur.params.ground_altitude {
            let mut c = (*cur.collection).clone();
            c.set_ground_altitude(p.ground_altitude).map_err(|e| bad(e.to_string()))?;
            Arc::new(c)
        } else {
            cur.collection.clone()
        };
        let calibrators = if p.mode != cur.params.mode {
            Arc::new(collection.calibrators(p.mode).map_err(|e| bad(e.to_string()))?)
        } else {
            cur.calibrators.clone()
        };
        let selection = Arc::new(collection.selected(p.range).map_err(|e| bad(e.to_string()))?);
        let keep_auto = p.mode == cur.params.mode && p.wavelengths.len() == cur.params.wavelengths.len()
            && p.wavelengths == cur.params.wavelengths;

        let generation = cur.generation + 1;
        let mut snap = Snapshot {
            generation,
            params: p,
            collection,
            calibrators,
            selection,
            auto_bounds: if keep_auto { cur.auto_bounds.clone() } else { None },
            stretch: cur.stretch.clone(),
            params_hash: 0,
        };
        finish_snapshot(&mut snap);
        let snap = Arc::new(snap);
        self.generation.store(generation, Ordering::Release);
        *self.state.write().unwrap_or_else(|e| e.into_inner()) = snap.clone();
        drop(_w);
        self.request_bands(&snap);
        let _ = self.events.send(Event::Params { generation });
        info!("render parameters → generation {generation}");
        Ok(ParamsAccepted {
            generation,
            params: snap.params.clone(),
        })
    }

    /// Waits for a tile worker slot. Requests superseded while queued fail
    /// without rendering.
    pub async fn tile_async(self: &Arc<Self>, z: u32, tx: i64, ty: i64, gen: Option<u64>) -> Result<(u64, Arc<Tile>)> {
        let gen = self.check_generation(gen)?;
        let _permit = self
            .tile_permits
            .acquire()
            .await
            .map_err(|_| ServiceError::Internal("tile workers closed".into()))?;
        let s = self.clone();
        tokio::task::spawn_blocking(move || s.tile(z, tx, ty, Some(gen)).map(|t| (gen, t)))
            .await
            .map_err(|e| ServiceError::Internal(e.to_string()))?
    }

    fn check_generation(&self, gen: Option<u64>) -> Result<u64> {
        let current = self.generation();
        match gen {
            None => Ok(current),
            Some(g) if g == current => Ok(g),
            Some(g) if g < current => {
                self.cancelled.fetch_add(1, Ordering::Relaxed);
                Err(ServiceError::Superseded { requested: g, current })
            }
            Some(g) => Err(ServiceError::NotFound(format!("unknown generation {g} (current {current})"))),
        }
    }

    /// Renders (or fetches from cache) tile `(tx, ty)` of zoom `z` for
    /// generation `gen` (default: current).
    pub fn tile(&self, z: u32, tx: i64, ty: i64, gen: Option<u64>) -> Result<Arc<Tile>> {
        if z > self.config.max_zoom {
            return Err(ServiceError::BadRequest(format!(
                "zoom {z} above maximum {}",
                self.config.max_zoom
            )));
        }
        let snap = self.snapshot();
        let gen = self.check_generation(gen)?;
        if gen != snap.generation {
            // a params update landed between the two reads
            self.cancelled.fetch_add(1, Ordering::Relaxed);
            return Err(ServiceError::Superseded {
                requested: gen,
                current: self.generation(),
            });
        }
        let epoch = self.loader.epoch();
        let key = TileKey {
            z,
            tx,
            ty,
            params: snap.params_hash,
            epoch,
        };
        if let Some(t) = lock(&self.cache).get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(t);
        }
        let hook = self.hook.read().unwrap_or_else(|e| e.into_inner()).clone();
        if let Some(h) = hook {
            h(gen);
        }
        let cancelled = || self.generation() != gen;
        let superseded = || {
            self.cancelled.fetch_add(1, Ordering::Relaxed);
            ServiceError::Superseded {
                requested: gen,
                current: self.generation(),
            }
        };
        let view = ViewWindow::tile(&self.pyramid, z, tx, ty).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let buf = match render_cached(&snap, &view, &cancelled) {
            Ok(b) => b,
            Err(JobError::Cancelled) => return Err(superseded()),
            Err(e) => return Err(ServiceError::from_job(e)),
        };
        if cancelled() {
            return Err(superseded());
        }
        let tile = Arc::new(encode_tile(&buf, &snap.stretch)?);
        if self.loader.epoch() == epoch {
            let bytes = tile.png.len() + tile.rgba.len();
            lock(&self.cache).insert(key, tile.clone(), bytes);
        }
        self.rendered.fetch_add(1, Ordering::Relaxed);
        Ok(tile)
    }

    /// Renders the tiles in `range` as one window, histograms the covered
    /// values and, if `apply` and the stretch follows the histogram, makes
    /// the resulting bounds current.
    pub fn histogram(&self, range: TileRange, apply: bool) -> Result<HistogramResponse> {
        let snap = self.snapshot();
        let gen = snap.generation;
        let (w, h) = (
            (range.tx1 - range.tx0 + 1) as usize * TILE_SIZE,
            (range.ty1 - range.ty0 + 1) as usize * TILE_SIZE,
        );
        if range.z > self.config.max_zoom || w.saturating_mul(h) > MAX_HISTOGRAM_PIXELS {
            return Err(ServiceError::BadRequest("viewport too large".into()));
        }
        let view = ViewWindow::tile(&self.pyramid, range.z, range.tx0, range.ty0)
            .and_then(|v| v.crop(0, 0, w, h))
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let cancelled = || self.generation() != gen;
        let buf = render_cached(&snap, &view, &cancelled).map_err(|e| match e {
            JobError::Cancelled => ServiceError::Superseded {
                requested: gen,
                current: self.generation(),
            },
            e => ServiceError::from_job(e),
        })?;
        let values = buf.covered_values();
        let channels: Vec<ChannelHistogram> = values
            .iter()
            .map(|v| match Histogram::of([v.as_slice()], HISTOGRAM_BINS) {
                Some(h) => ChannelHistogram {
                    min: h.min,
                    max: h.max,
                    total: h.total,
                    counts: h.counts,
                },
                None => ChannelHistogram {
                    min: 0.0,
                    max: 0.0,
                    total: 0,
                    counts: vec![0; HISTOGRAM_BINS],
                },
            })
            .collect();
        if values.iter().all(|v| v.is_empty()) {
            return Ok(HistogramResponse {
                generation: gen,
                channels,
                bounds: None,
                applied: false,
            });
        }
        let refs: Vec<&[f32]> = values.iter().map(|v| v.as_slice()).collect();
        let fs = full_scale(&snap.collection, snap.params.mode);
        let bounds = stretch_bounds(&refs, snap.params.stretch, StretchMethod::Histogram, fs);
        let follows = snap.params.stretch != StretchMode::None && snap.params.stretch_bounds.is_none();
        if !(apply && follows) {
            return Ok(HistogramResponse {
                generation: gen,
                channels,
                bounds: Some(bounds),
                applied: false,
            });
        }
        let _w = lock(&self.writer);
        let cur = self.snapshot();
        if cur.generation != gen {
            return Err(ServiceError::Superseded {
                requested: gen,
                current: cur.generation,
            });
        }
        if cur.auto_bounds.as_ref() == Some(&bounds.channels) {
            return Ok(HistogramResponse {
                generation: gen,
                channels,
                bounds: Some(bounds),
                applied: false,
            });
        }
        let generation = gen + 1;
        let mut next = (*cur).clone();
        next.generation = generation;
        next.auto_bounds = Some(bounds.channels.clone());
        finish_snapshot(&mut next);
        self.generation.store(generation, Ordering::Release);
        *self.state.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        drop(_w);
        let _ = self.events.send(Event::Params { generation });
        Ok(HistogramResponse {
            generation,
            channels,
            bounds: Some(bounds),
            applied: true,
        })
    }

    /// Validates `overlay` merged over the session's base job and runs the
    /// export on a background thread.
    pub fn start_export(&self, overlay: serde_json::Value) -> Result<u64> {
        let mut merged = match &self.config.base_job {
            Some(b) => serde_json::to_value(b).map_err(|e| ServiceError::Internal(e.to_string()))?,
            None => serde_json::Value::Object(Default::default()),
        };
        match (&mut merged, overlay) {
            (serde_json::Value::Object(base), serde_json::Value::Object(o)) => base.extend(o),
            _ => return Err(ServiceError::BadRequest("export request must be a JSON object".into())),
        }
        let config: JobConfig =
            serde_json::from_value(merged).map_err(|e| ServiceError::BadRequest(format!("job config: {e}")))?;
        swathcube::job::validate_config(&config).map_err(|e| ServiceError::BadRequest(e.join("; ")))?;

        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        let status = JobStatus {
            id,
            state: JobState::Running,
            done: 0,
            total: 0,
            output: config.output.clone(),
            error: None,
            timings: None,
        };
        lock(&self.jobs).insert(id, status);
        let _ = self.events.send(Event::Job {
            id,
            state: JobState::Running,
            done: 0,
            total: 0,
        });
        let (jobs, events) = (self.jobs.clone(), self.events.clone());
        std::thread::Builder::new()
            .name(format!("export-{id}"))
            .spawn(move || {
                let mut progress = |done: usize, total: usize| {
                    if let Some(j) = lock(&jobs).get_mut(&id) {
                        j.done = done;
                        j.total = total;
                    }
                    let _ = events.send(Event::Job {
                        id,
                        state: JobState::Running,
                        done,
                        total,
                    });
                };
                let result = run_export(&config, &mut progress, &|| false);
                let mut all = lock(&jobs);
                let j = all.get_mut(&id).expect("job registered");
                match result {
                    Ok(r) => {
                        j.state = JobState::Done;
                        j.output = Some(r.data);
                        j.timings = Some(r.timings.report());
                    }
                    Err(e) => {
                        warn!("export job {id} failed: {e}");
                        j.state = JobState::Failed;
                        j.error = Some(e.to_string());
                    }
                }
                let _ = events.send(Event::Job {
                    id,
                    state: j.state,
                    done: j.done,
                    total: j.total,
                });
            })
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok(id)
    }

    pub fn job(&self, id: u64) -> Option<JobStatus> {
        lock(&self.jobs).get(&id).cloned()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.loader.stop();
    }
}

/// Renders with whatever bands are already in memory; the rest are pending.
fn render_cached(
    snap: &Snapshot,
    view: &ViewWindow,
    cancelled: &(dyn Fn() -> bool + Sync),
) -> swathcube::job::Result<PixelBuffer> {
    let c = &snap.collection;
    c.render(
        view,
        &snap.selection,
        &snap.params.wavelengths,
        &snap.calibrators,
        &|cube, band| c.cubes()[cube].cached_band(band),
        cancelled,
    )
}

/// Resolves display bounds and the cache hash for a snapshot.
fn finish_snapshot(s: &mut Snapshot) {
    let n = s.params.wavelengths.len();
    let fs = full_scale(&s.collection, s.params.mode);
    s.stretch = match (&s.params.stretch_bounds, s.params.stretch, &s.auto_bounds) {
        (Some(b), mode, _) => StretchBounds {
            mode,
            channels: b.clone(),
        },
        (None, StretchMode::None, _) => StretchBounds::full_scale(n, fs),
        (None, mode, Some(b)) if b.len() == n => StretchBounds {
            mode,
            channels: b.clone(),
        },
        (None, mode, _) => StretchBounds {
            mode,
            channels: vec![(0.0, fs); n],
        },
    };
    let mut h = DefaultHasher::new();
    serde_json::to_string(&(&s.params, &s.stretch))
        .expect("params serialize")
        .hash(&mut h);
    s.params_hash = h.finish();
}

fn encode_tile(buf: &PixelBuffer, stretch: &StretchBounds) -> Result<Tile> {
    use image::ImageEncoder;
    let rgba = buf.to_rgba(stretch);
    let mut png = Vec::new();
    image::codecs::png::PngEncoder::new_with_quality(
        &mut png,
        image::codecs::png::CompressionType::Fast,
        image::codecs::png::FilterType::Sub,
    )
    .write_image(&rgba, buf.width as u32, buf.height as u32, image::ExtendedColorType::Rgba8)
    .map_err(|e| ServiceError::Internal(format!("png encoding: {e}")))?;
    let covered = buf.count(COVERED);
    let pending = buf.count(PENDING);
    Ok(Tile {
        png,
        rgba,
        covered,
        pending,
        uncovered: buf.width * buf.height - covered - pending,
    })
}
