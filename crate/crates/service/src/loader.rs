use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use log::{debug, warn};
use serde::Serialize;
use swathcube::cube_io::CubeHandle;
use tokio::sync::broadcast;

use crate::Event;

/// Load state of one band of one cube. Transitions only move forward:
/// not-loaded → loading → ready (or failed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandStatus {
    NotLoaded,
    Loading,
    Ready,
    Failed,
}

struct Job {
    cube: usize,
    band: usize,
    handle: CubeHandle,
}

/// Background band readers and the status table they publish to.
pub(crate) struct Loader {
    queue: Mutex<VecDeque<Job>>,
    wake: Condvar,
    shutdown: AtomicBool,
    status: Mutex<Vec<BTreeMap<usize, BandStatus>>>,
    /// Bumped whenever a band becomes ready; part of every tile cache key.
    epoch: AtomicU64,
    events: broadcast::Sender<Event>,
}

impl Loader {
    pub fn start(cubes: usize, threads: usize, events: broadcast::Sender<Event>) -> Arc<Loader> {
        let loader = Arc::new(Loader {
            queue: Mutex::new(VecDeque::new()),
            wake: Condvar::new(),
            shutdown: AtomicBool::new(false),
            status: Mutex::new(vec![BTreeMap::new(); cubes]),
            epoch: AtomicU64::new(0),
            events,
        });
        for i in 0..threads.max(1) {
            let l = loader.clone();
            std::thread::Builder::new()
                .name(format!("band-loader-{i}"))
                .spawn(move || l.run())
                .expect("spawn loader thread");
        }
        loader
    }

    pub fn epoch(&self) -> u64 {
        self.epoch.load(Ordering::Acquire)
    }

    pub fn status(&self, cube: usize, band: usize) -> BandStatus {
        self.lock_status()[cube].get(&band).copied().unwrap_or(BandStatus::NotLoaded)
    }

    pub fn statuses(&self) -> Vec<BTreeMap<usize, BandStatus>> {
        self.lock_status().clone()
    }

    pub fn busy(&self) -> bool {
        self.lock_status()
            .iter()
            .any(|m| m.values().any(|s| *s == BandStatus::Loading))
    }

    /// Queues a band unless it is already loading or loaded; marks it
    /// loading right away.
    pub fn request(&self, cube: usize, band: usize, handle: &CubeHandle) {
        {
            let mut st = self.lock_status();
            match st[cube].get(&band) {
                Some(BandStatus::Loading | BandStatus::Ready) => return,
                _ if handle.is_cached(band) => {
                    st[cube].insert(band, BandStatus::Ready);
                    drop(st);
                    let _ = self.events.send(Event::Band {
                        cube,
                        band,
                        status: BandStatus::Ready,
                    });
                    return;
                }
                _ => {
                    st[cube].insert(band, BandStatus::Loading);
                }
            }
        }
        let _ = self.events.send(Event::Band {
            cube,
            band,
            status: BandStatus::Loading,
        });
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).push_back(Job {
            cube,
            band,
            handle: handle.clone(),
        });
        self.wake.notify_one();
    }

    pub fn stop(&self) {
        self.shutdown.store(true, Ordering::Release);
        self.wake.notify_all();
    }

    fn lock_status(&self) -> std::sync::MutexGuard<'_, Vec<BTreeMap<usize, BandStatus>>> {
        self.status.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn run(&self) {
        loop {
            let job = {
                let mut q = self.queue.lock().unwrap_or_else(|e| e.into_inner());
                loop {
                    if self.shutdown.load(Ordering::Acquire) {
                        return;
                    }
                    if let Some(j) = q.pop_front() {
                        break j;
                    }
                    q = self.wake.wait(q).unwrap_or_else(|e| e.into_inner());
                }
            };
            let status = match job.handle.load_band(job.band) {
                Ok(_) => {
                    debug!("loaded {} band {}", job.handle.id(), job.band);
                    BandStatus::Ready
                }
                Err(e) => {
                    warn!("loading {} band {}: {e}", job.handle.id(), job.band);
                    BandStatus::Failed
                }
            };
            self.lock_status()[job.cube].insert(job.band, status);
            if status == BandStatus::Ready {
                self.epoch.fetch_add(1, Ordering::AcqRel);
            }
            let _ = self.events.send(Event::Band {
                cube: job.cube,
                band: job.band,
                status,
            });
        }
    }
}
