use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures::StreamExt;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use swathcube::calibration::{CalibrationMode, Histogram, StretchMode, HISTOGRAM_BINS};
use swathcube::cube_io::ByteSource;
use swathcube::job::{Collection, CollectionOptions, JobConfig};
use swathcube::mesh::mesh_bounds;
use swathcube::raster::{ViewWindow, TILE_SIZE};
use swathcube_oracle::{AttitudeNoise, Camera, FlightPlan, SyntheticScene, SyntheticSurvey};
use swathcube_service::{router, BandStatus, ParamsUpdate, ServiceConfig, ServiceError, Session, TileRange};
use tower::ServiceExt;

fn survey(passes: usize, lines: usize, samples: usize, bands: usize) -> SyntheticSurvey {
    let plan = FlightPlan {
        passes,
        lines_per_pass: lines,
        cubes_per_pass: 1,
        noise: Some(AttitudeNoise::uniform(3.0, 11)),
        ..FlightPlan::default()
    };
    SyntheticSurvey::capture(&plan, &Camera::new(samples, bands, 47.5)).unwrap()
}

fn stripes() -> SyntheticScene {
    SyntheticScene::Stripes {
        period: 3.0,
        normal_deg: 30.0,
        low: 100.0,
        high: 900.0,
    }
}

fn config(autoload: bool) -> ServiceConfig {
    ServiceConfig {
        autoload,
        ..ServiceConfig::default()
    }
}

fn session(autoload: bool) -> Arc<Session> {
    let c = survey(2, 200, 120, 3).collection(&stripes(), None).unwrap();
    Session::new(c, config(autoload)).unwrap()
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let (parts, body) = resp.into_parts();
    let bytes = axum::body::to_bytes(body, usize::MAX).await.unwrap();
    (parts.status, parts.headers, bytes.to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, _, b) = call(app, req).await;
    (s, b)
}

fn json_of(b: &[u8]) -> Value {
    serde_json::from_slice(b).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn fresh_metadata_reports_nothing_loaded() {
    let s = session(false);
    let app = router(s.clone());
    let (status, _, body) = get(&app, "/api/metadata").await;
    assert_eq!(status, StatusCode::OK);
    let m = json_of(&body);
    let cubes = m["cubes"].as_array().unwrap();
    assert_eq!(cubes.len(), 2);
    assert!(cubes.iter().all(|c| c["status"] == "not-loaded"));
    let snap = s.snapshot();
    let b = mesh_bounds(snap.collection.meshes()).unwrap();
    assert_eq!(m["bounds"]["min_north"].as_f64().unwrap(), b.min_north);
    assert_eq!(m["bounds"]["max_east"].as_f64().unwrap(), b.max_east);
    assert_eq!(m["generation"], 1);
    assert_eq!(m["pyramid"]["tile_size"], 256);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn metadata_after_loading_reports_ready() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let (_, _, body) = get(&router(s), "/api/metadata").await;
    let m = json_of(&body);
    assert!(m["cubes"].as_array().unwrap().iter().all(|c| c["status"] == "ready"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn tiles_are_png_with_coverage_header() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let app = router(s.clone());
    let (status, headers, body) = get(&app, "/api/tile/0/0/0").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers["content-type"], "image/png");
    assert_eq!(headers["x-generation"], "1");
    let cov = headers["x-coverage"].to_str().unwrap().to_string();
    let img = image::load_from_memory(&body).unwrap().to_rgba8();
    assert_eq!(img.dimensions(), (256, 256));
    let opaque = img.pixels().filter(|p| p[3] == 255).count();
    assert!(opaque > 1000);
    assert!(cov.starts_with(&format!("covered={opaque}; pending=0;")), "{cov}");

    // same key and params → same bytes, second one from cache
    let (_, _, again) = get(&app, "/api/tile/0/0/0").await;
    assert_eq!(body, again);
    assert_eq!(s.stats().cache_hits, 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn tile_outside_collection_is_uncovered() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let t = s.tile(3, 40, -7, None).unwrap();
    assert_eq!(t.covered + t.pending, 0);
    assert_eq!(t.uncovered, TILE_SIZE * TILE_SIZE);
    assert!(t.rgba.iter().all(|&v| v == 0));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unloaded_cubes_render_gray() {
    let s = session(false);
    let t = s.tile(0, 0, 0, None).unwrap();
    assert_eq!(t.covered, 0);
    assert!(t.pending > 1000);
    let gray = t.rgba.chunks_exact(4).filter(|p| *p == [128, 128, 128, 255]).count();
    assert_eq!(gray, t.pending);
}

#[test]
fn tiles_equal_crops_of_larger_renders() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let snap = s.snapshot();
    let c = &snap.collection;
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..100 {
        let z = rng.random_range(0..=5u32);
        let n = 1i64 << z;
        let (tx, ty) = (rng.random_range(0..n), rng.random_range(0..n));
        let tile = s.tile(z, tx, ty, None).unwrap();
        let (dx, dy) = (rng.random_range(0..200i64), rng.random_range(0..200i64));
        let (ex, ey) = (rng.random_range(0..200usize), rng.random_range(0..200usize));
        let big = ViewWindow::tile(s.pyramid(), z, tx, ty)
            .unwrap()
            .crop(-dx, -dy, 256 + dx as usize + ex, 256 + dy as usize + ey)
            .unwrap();
        let buf = c
            .render(
                &big,
                &snap.selection,
                &snap.params.wavelengths,
                &snap.calibrators,
                &|cube, band| c.cubes()[cube].cached_band(band),
                &|| false,
            )
            .unwrap();
        let rgba = buf.to_rgba(&snap.stretch);
        let w = big.width();
        for y in 0..256 {
            let row = &rgba[((y + dy as usize) * w + dx as usize) * 4..][..256 * 4];
            assert_eq!(row, &tile.rgba[y * 256 * 4..][..256 * 4], "z{z} ({tx},{ty}) row {y}");
        }
    }
}

/// Blocks every tile render until released.
#[derive(Default)]
struct Gate {
    state: Mutex<(Vec<u64>, bool)>,
    cv: Condvar,
}

impl Gate {
    fn enter(&self, gen: u64) {
        let mut st = self.state.lock().unwrap();
        st.0.push(gen);
        self.cv.notify_all();
        while !st.1 {
            st = self.cv.wait(st).unwrap();
        }
    }

    fn wait_entered(&self, n: usize) {
        let mut st = self.state.lock().unwrap();
        while st.0.len() < n {
            st = self.cv.wait(st).unwrap();
        }
    }

    fn open(&self) {
        self.state.lock().unwrap().1 = true;
        self.cv.notify_all();
    }
}

#[test]
fn rapid_updates_complete_only_latest_generation() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let gate = Arc::new(Gate::default());
    let g = gate.clone();
    s.set_render_hook(Some(Arc::new(move |gen| g.enter(gen))));
    let mut handles = Vec::new();
    for i in 0..10 {
        let gen = s.generation();
        let s2 = s.clone();
        handles.push((gen, std::thread::spawn(move || s2.tile(1, 0, 0, Some(gen)))));
        gate.wait_entered(i + 1);
        let t0 = Instant::now();
        s.set_params(ParamsUpdate {
            stretch_bounds: Some(Some(vec![(0.0, 500.0 + i as f32); 3])),
            ..Default::default()
        })
        .unwrap();
        assert!(t0.elapsed() < Duration::from_millis(500), "update waited on a render");
    }
    let last = s.generation();
    assert_eq!(last, 11);
    let s2 = s.clone();
    handles.push((last, std::thread::spawn(move || s2.tile(1, 0, 0, Some(last)))));
    gate.wait_entered(11);
    gate.open();
    for (gen, h) in handles {
        let r = h.join().unwrap();
        if gen == last {
            assert!(r.is_ok());
        } else {
            assert!(matches!(r, Err(ServiceError::Superseded { requested, current: 11 }) if requested == gen));
        }
    }
    assert_eq!(s.stats().rendered, 1);
    assert_eq!(s.stats().cancelled, 10);
    assert_eq!(s.cached_tiles(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stale_generation_gets_conflict() {
    let s = session(false);
    let app = router(s.clone());
    let (st, body) = post(&app, "/api/params", json!({ "stretch": "per-channel" })).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(json_of(&body)["generation"], 2);
    let (st, _, body) = get(&app, "/api/tile/0/0/0?gen=1").await;
    assert_eq!(st, StatusCode::CONFLICT);
    let v = json_of(&body);
    assert_eq!(v["status"], "cancelled");
    assert_eq!(v["generation"], 2);
    let (st, _, _) = get(&app, "/api/tile/0/0/0?gen=2").await;
    assert_eq!(st, StatusCode::OK);
    let (st, _, _) = get(&app, "/api/tile/0/0/0?gen=9").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

/// Every read takes `delay`.
struct SlowSource {
    inner: Box<dyn ByteSource>,
    delay: Duration,
}

impl ByteSource for SlowSource {
    fn len(&self) -> std::io::Result<u64> {
        self.inner.len()
    }

    fn read_at(&self, offset: u64, buf: &mut [u8]) -> std::io::Result<()> {
        std::thread::sleep(self.delay);
        self.inner.read_at(offset, buf)
    }

    fn describe(&self) -> String {
        format!("slow {}", self.inner.describe())
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn metadata_and_params_never_wait_on_band_io() {
    let c = survey(2, 200, 120, 6)
        .collection_with(&stripes(), None, |inner| {
            Box::new(SlowSource {
                inner,
                delay: Duration::from_millis(400),
            })
        })
        .unwrap();
    let s = Session::new(
        c,
        ServiceConfig {
            loader_threads: 1,
            ..config(true)
        },
    )
    .unwrap();
    let app = router(s.clone());
    let mut worst = Duration::ZERO;
    for i in 0..6 {
        let t0 = Instant::now();
        let (st, _, body) = get(&app, "/api/metadata").await;
        assert_eq!(st, StatusCode::OK);
        worst = worst.max(t0.elapsed());
        assert!(json_of(&body)["cubes"].as_array().unwrap().iter().any(|c| c["status"] == "loading"));

        let update = if i % 2 == 0 {
            json!({ "stretch": "per-channel" })
        } else {
            json!({ "wavelengths": [1000.0 - i as f64 * 50.0, 700.0, 400.0] })
        };
        let t0 = Instant::now();
        let (st, _) = post(&app, "/api/params", update).await;
        assert_eq!(st, StatusCode::OK);
        worst = worst.max(t0.elapsed());
    }
    assert!(worst < Duration::from_millis(150), "slowest metadata/params call {worst:?}");
    // a tile during loading is served at once, gray where data is missing
    let t0 = Instant::now();
    let t = s.tile(0, 0, 0, None).unwrap();
    assert!(t0.elapsed() < Duration::from_millis(2000));
    assert!(t.pending > 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stretch_change_keeps_bands_wavelength_change_loads() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let before = s.metadata();
    let g = s
        .set_params(ParamsUpdate {
            stretch: Some(StretchMode::PerChannel),
            ..Default::default()
        })
        .unwrap()
        .generation;
    assert_eq!(g, 2);
    let after = s.metadata();
    for (a, b) in before.cubes.iter().zip(&after.cubes) {
        assert_eq!(a.band_status, b.band_status);
        assert_eq!(b.status, BandStatus::Ready);
    }

    let mut events = s.subscribe();
    s.set_params(ParamsUpdate {
        wavelengths: Some(vec![905.0]),
        ..Default::default()
    })
    .unwrap();
    let snap = s.snapshot();
    let b = snap.collection.band_index(0, 905.0);
    assert_ne!(s.band_status(0, b), BandStatus::NotLoaded);
    let first = events.recv().await.unwrap();
    assert_eq!(
        first,
        swathcube_service::Event::Band {
            cube: 0,
            band: b,
            status: BandStatus::Loading
        }
    );
    assert!(s.wait_idle(Duration::from_secs(20)));
    assert_eq!(s.band_status(0, b), BandStatus::Ready);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn invalid_updates_change_nothing() {
    let s = session(false);
    let app = router(s.clone());
    let before = s.snapshot().params.clone();
    for bad in [
        json!({ "wavelengths": [500.0, 600.0] }),
        json!({ "mode": "radiance" }),
        json!({ "stretch": "per-channel", "range": { "first": 1, "last": 0 } }),
        json!({ "stretch": "common", "ground_altitude": 1.0e6 }),
        json!({ "stretch_bounds": [[5.0, 1.0], [0.0, 1.0], [0.0, 1.0]] }),
        json!({ "colour": "blue" }),
    ] {
        let (st, _) = post(&app, "/api/params", bad.clone()).await;
        assert!(st.is_client_error(), "{bad} gave {st}");
    }
    assert_eq!(s.generation(), 1);
    assert_eq!(s.snapshot().params, before);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ground_and_range_updates_apply() {
    let s = session(false);
    let g0 = s.snapshot().params.ground_altitude;
    let b0 = s.metadata().bounds;
    s.set_params(ParamsUpdate {
        ground_altitude: Some(g0 - 10.0),
        ..Default::default()
    })
    .unwrap();
    let b1 = s.metadata().bounds;
    assert!(b1.width() > b0.width(), "lower ground widens the footprint");
    s.set_params(ParamsUpdate {
        range: Some(Some("1:1".parse().unwrap())),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(*s.snapshot().selection, vec![1]);
    assert!(s.metadata().bounds.width() < b1.width());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn histogram_of_uniform_scene_has_one_bin() {
    let c = survey(1, 200, 120, 3)
        .collection(&SyntheticScene::Constant(500.0), None)
        .unwrap();
    let s = Session::new(c, config(true)).unwrap();
    assert!(s.wait_idle(Duration::from_secs(20)));
    let app = router(s.clone());
    let (st, _, body) = get(&app, "/api/histogram?viewport=0/0/0/0/0").await;
    assert_eq!(st, StatusCode::OK);
    let h = json_of(&body);
    for ch in h["channels"].as_array().unwrap() {
        let counts: Vec<u64> = serde_json::from_value(ch["counts"].clone()).unwrap();
        assert_eq!(counts.len(), HISTOGRAM_BINS);
        assert_eq!(counts.iter().filter(|c| **c > 0).count(), 1);
    }
    assert_eq!(h["applied"], true);
    assert_eq!(s.generation(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn histogram_of_empty_viewport_leaves_stretch() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    let stretch = s.snapshot().stretch.clone();
    let h = s.histogram("4/100/100/101/101".parse().unwrap(), true).unwrap();
    assert!(h.channels.iter().all(|c| c.total == 0));
    assert!(h.bounds.is_none());
    assert!(!h.applied);
    assert_eq!(s.generation(), 1);
    assert_eq!(s.snapshot().stretch, stretch);
}

#[test]
fn histogram_matches_recount_of_tiles() {
    let s = session(true);
    assert!(s.wait_idle(Duration::from_secs(20)));
    s.set_params(ParamsUpdate {
        wavelengths: Some(vec![700.0]),
        ..Default::default()
    })
    .unwrap();
    assert!(s.wait_idle(Duration::from_secs(20)));
    let range = TileRange {
        z: 2,
        tx0: 0,
        ty0: 0,
        tx1: 2,
        ty1: 1,
    };
    let h = s.histogram(range, false).unwrap();
    let snap = s.snapshot();
    let c = &snap.collection;
    let mut values = Vec::new();
    for ty in 0..=1 {
        for tx in 0..=2 {
            let v = ViewWindow::tile(s.pyramid(), 2, tx, ty).unwrap();
            let buf = c
                .render(
                    &v,
                    &snap.selection,
                    &snap.params.wavelengths,
                    &snap.calibrators,
                    &|cube, band| c.cubes()[cube].cached_band(band),
                    &|| false,
                )
                .unwrap();
            values.extend(buf.covered_values().remove(0));
        }
    }
    let oracle = Histogram::of([values.as_slice()], HISTOGRAM_BINS).unwrap();
    assert_eq!(h.channels[0].counts, oracle.counts);
    assert_eq!(h.channels[0].total, values.len() as u64);
    assert!(values.len() > 10_000);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn export_job_runs_in_background() {
    let dir = tempfile::tempdir().unwrap();
    let spec = swathcube_oracle::FixtureSpec {
        plan: FlightPlan {
            passes: 2,
            lines_per_pass: 150,
            ..FlightPlan::default()
        },
        samples: 100,
        bands: 4,
        ..swathcube_oracle::FixtureSpec::desk_scale(4)
    };
    let files = swathcube_oracle::write_fixture(dir.path(), &spec).unwrap();
    let base = JobConfig {
        cubes: Some(files.cube_list.clone()),
        poses: Some(files.poses.clone()),
        ..JobConfig::default()
    };
    let cubes = swathcube::job::read_cube_list(&files.cube_list).unwrap();
    let c = Collection::load(&cubes, &files.poses, &CollectionOptions::default()).unwrap();
    let s = Session::new(
        c,
        ServiceConfig {
            base_job: Some(base),
            ..config(false)
        },
    )
    .unwrap();
    let app = router(s.clone());
    let out = dir.path().join("mosaic.raw");
    let (st, body) = post(
        &app,
        "/api/export",
        json!({ "gsd": 0.1, "wavelengths": [550.0, 800.0], "output": out }),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let id = json_of(&body)["id"].as_u64().unwrap();
    let t0 = Instant::now();
    let status = loop {
        let (st, _, body) = get(&app, &format!("/api/export/{id}")).await;
        assert_eq!(st, StatusCode::OK);
        let v = json_of(&body);
        if v["state"] != "running" {
            break v;
        }
        assert!(t0.elapsed() < Duration::from_secs(60));
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(status["state"], "done", "{status}");
    assert_eq!(status["done"], 2);
    assert!(status["timings"].as_str().unwrap().contains("stage=render wall_ms="));
    assert!(out.exists());

    let (st, _) = post(&app, "/api/export", json!({ "gsd": 0.0, "output": out })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _, _) = get(&app, "/api/export/999").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn events_stream_band_and_params_changes() {
    let s = session(false);
    let app = router(s.clone());
    let resp = app
        .clone()
        .oneshot(Request::get("/api/events").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut stream = resp.into_body().into_data_stream();
    let s2 = s.clone();
    tokio::task::spawn_blocking(move || {
        s2.set_params(ParamsUpdate {
            mode: Some(CalibrationMode::Raw),
            wavelengths: Some(vec![600.0]),
            ..Default::default()
        })
        .unwrap()
    })
    .await
    .unwrap();
    let mut text = String::new();
    let deadline = Instant::now() + Duration::from_secs(20);
    while !(text.contains("\"status\":\"ready\"") && text.contains("event: params")) {
        let left = deadline.saturating_duration_since(Instant::now());
        let chunk = tokio::time::timeout(left, stream.next()).await.expect("events arrive").unwrap().unwrap();
        text.push_str(&String::from_utf8_lossy(&chunk));
    }
    assert!(text.contains("event: band"));
    assert!(text.contains("\"status\":\"loading\""));
    assert!(text.contains("\"generation\":2"));
}
