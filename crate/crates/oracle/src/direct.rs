use swathcube::geodesy::{Pose, PoseTrack};
use swathcube::mesh::GroundModel;
use swathcube::raster::ViewWindow;

use crate::capture::{ground_hit, Camera};

/// Output of forward (direct) georectification.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    pub width: usize,
    pub height: usize,
    /// Row-major; `NaN` where nothing landed.
    pub values: Vec<f32>,
    /// `(line, sample)` of the last sample plotted at each pixel.
    pub labels: Vec<Option<(u32, u32)>>,
    /// Rays that did not reach the ground.
    pub degenerate: usize,
}

impl DirectResult {
    pub fn covered(&self, i: usize) -> bool {
        self.labels[i].is_some()
    }
}

/// Local pixel containing ground point `(n, e)`, i.e. the pixel whose center
/// is nearest.
#[inline]
fn pixel_of(view: &ViewWindow, n: f64, e: f64) -> Option<usize> {
    let (x, y) = view.to_local(n, e);
    let (x, y) = (x.floor(), y.floor());
    if x < 0.0 || y < 0.0 || x >= view.width() as f64 || y >= view.height() as f64 {
        return None;
    }
    Some(y as usize * view.width() + x as usize)
}

/// Projects every sample's center ray to the ground and plots the sample at
/// the nearest output pixel. Later samples overwrite earlier ones; pixels
/// no sample lands in stay uncovered.
pub fn direct_georectify(
    plane: &[f32],
    camera: &Camera,
    track: &PoseTrack,
    ground: &GroundModel,
    view: &ViewWindow,
) -> DirectResult {
    let s = camera.samples;
    assert_eq!(plane.len(), s * track.len());
    let mut out = DirectResult {
        width: view.width(),
        height: view.height(),
        values: vec![f32::NAN; view.len()],
        labels: vec![None; view.len()],
        degenerate: 0,
    };
    let rays: Vec<[f64; 3]> = (0..s).map(|i| camera.ray(i as f64 + 0.5)).collect();
    for line in 0..track.len() {
        let pose = track.pose(line);
        for (sample, ray) in rays.iter().enumerate() {
            match ground_hit(&pose, *ray, ground) {
                Some([n, e]) => {
                    if let Some(i) = pixel_of(view, n, e) {
                        out.values[i] = plane[line * s + sample];
                        out.labels[i] = Some((line as u32, sample as u32));
                    }
                }
                None => out.degenerate += 1,
            }
        }
    }
    out
}

/// Interpolation-free ground truth for inverse lookups.
///
/// Every `(line, sample)` cell is split into `sub × sub` sub-rays: sub-line
/// positions interpolate the pose between line `i` and its successor
/// (continuous exposure), sub-sample positions are evenly spaced on the
/// image plane. Sub-rays landing within `max_distance` pixels of an output
/// pixel's center are its candidates. Where the footprint folds over
/// itself, the latest line wins, as in [`direct_georectify`]: the pixel
/// takes the highest line whose sub-ray is nearest among that line and its
/// two neighbors, with that sub-ray's sample.
pub fn supersampled_lookup(
    camera: &Camera,
    track: &PoseTrack,
    next: Option<&Pose>,
    ground: &GroundModel,
    view: &ViewWindow,
    sub: usize,
    max_distance: f64,
) -> Vec<Option<(u32, u32)>> {
    let (w, h) = (view.width(), view.height());
    let mut buckets: Vec<Vec<(f32, f32, u32, u32)>> = vec![Vec::new(); w * h];
    let lines = track.len();
    let rays: Vec<[f64; 3]> = (0..camera.samples * sub)
        .map(|k| camera.ray((k as f64 + 0.5) / sub as f64))
        .collect();
    for line in 0..lines {
        let a = track.pose(line);
        let b = if line + 1 < lines {
            track.pose(line + 1)
        } else if let Some(n) = next {
            *n
        } else {
            continue;
        };
        for j in 0..sub {
            let f = (j as f64 + 0.5) / sub as f64;
            let pose = Pose {
                position: a.position.lerp(&b.position, f),
                orientation: a.orientation.slerp(&b.orientation, f),
            };
            for (k, ray) in rays.iter().enumerate() {
                let Some([n, e]) = ground_hit(&pose, *ray, ground) else {
                    continue;
                };
                let (x, y) = view.to_local(n, e);
                let (px, py) = (x.floor(), y.floor());
                if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                    continue;
                }
                buckets[py as usize * w + px as usize].push((
                    (x - px) as f32,
                    (y - py) as f32,
                    line as u32,
                    (k / sub) as u32,
                ));
            }
        }
    }
    let max2 = (max_distance * max_distance) as f32;
    let mut out = vec![None; w * h];
    let mut near: Vec<(f32, u32, u32)> = Vec::new();
    for py in 0..h {
        for px in 0..w {
            near.clear();
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (bx, by) = (px as i64 + dx, py as i64 + dy);
                    if bx < 0 || by < 0 || bx >= w as i64 || by >= h as i64 {
                        continue;
                    }
                    for &(fx, fy, l, s) in &buckets[by as usize * w + bx as usize] {
                        let ddx = dx as f32 + fx - 0.5;
                        let ddy = dy as f32 + fy - 0.5;
                        let d2 = ddx * ddx + ddy * ddy;
                        if d2 <= max2 {
                            near.push((d2, l, s));
                        }
                    }
                }
            }
            out[py * w + px] = latest_owner(&mut near);
        }
    }
    out
}

/// Highest line whose sub-ray is the nearest among that line and its
/// neighbors.
fn latest_owner(near: &mut [(f32, u32, u32)]) -> Option<(u32, u32)> {
    near.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let mut i = 0;
    while i < near.len() {
        let line = near[i].1;
        let local = near
            .iter()
            .filter(|c| c.1.abs_diff(line) <= 1)
            .min_by(|a, b| a.0.total_cmp(&b.0))?;
        if local.1 == line {
            return Some((local.1, local.2));
        }
        while i < near.len() && near[i].1 == line {
            i += 1;
        }
    }
    None
}
