//! Measurements on rendered images that don't go through the renderer's
//! own geometry code.

use swathcube::raster::ViewWindow;

use crate::capture::{ground_hit, SimulatedCube};
use crate::scene::SyntheticScene;

/// Footprint outline of a cube's lines `0..lines` (plus the successor pose
/// when chained): sample-0 ends forward, sample-S ends back, as
/// `(north, east)`.
pub fn footprint_polygon(
    cube: &SimulatedCube,
    next: Option<&swathcube::geodesy::Pose>,
    ground: &swathcube::mesh::GroundModel,
) -> Vec<[f64; 2]> {
    let s = cube.camera.samples as f64;
    let (r0, r1) = (cube.camera.ray(0.0), cube.camera.ray(s));
    let poses: Vec<_> = (0..cube.lines())
        .map(|i| cube.track.pose(i))
        .chain(next.copied())
        .collect();
    let left = poses.iter().filter_map(|p| ground_hit(p, r0, ground));
    let right: Vec<_> = poses.iter().filter_map(|p| ground_hit(p, r1, ground)).collect();
    left.chain(right.into_iter().rev()).collect()
}

/// Pixels whose centers lie inside any polygon (even-odd rule per polygon,
/// union across polygons), eroded by `erode` pixels so only pixels whose
/// whole neighborhood is inside remain.
pub fn interior_mask(polygons: &[Vec<[f64; 2]>], view: &ViewWindow, erode: usize) -> Vec<bool> {
    let (w, h) = (view.width(), view.height());
    let mut inside = vec![false; w * h];
    for poly in polygons {
        let pts: Vec<(f64, f64)> = poly.iter().map(|p| view.to_local(p[0], p[1])).collect();
        let n = pts.len();
        let mut xs = Vec::new();
        for row in 0..h {
            let yc = row as f64 + 0.5;
            xs.clear();
            for i in 0..n {
                let (a, b) = (pts[i], pts[(i + 1) % n]);
                if (a.1 <= yc) != (b.1 <= yc) {
                    xs.push(a.0 + (yc - a.1) / (b.1 - a.1) * (b.0 - a.0));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let x0 = (pair[0] - 0.5).ceil().max(0.0) as usize;
                let x1 = ((pair[1] - 0.5).ceil().max(0.0) as usize).min(w);
                for x in x0..x1 {
                    // strictly inside
                    let xc = x as f64 + 0.5;
                    if xc > pair[0] && xc < pair[1] {
                        inside[row * w + x] = true;
                    }
                }
            }
        }
    }
    for _ in 0..erode {
        let prev = inside.clone();
        for y in 0..h {
            for x in 0..w {
                if !prev[y * w + x] {
                    continue;
                }
                let keep = (-1i64..=1).all(|dy| {
                    (-1i64..=1).all(|dx| {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 && prev[ny as usize * w + nx as usize]
                    })
                });
                inside[y * w + x] = keep;
            }
        }
    }
    inside
}

/// Edge straightness of a two-level image whose edges run roughly along
/// the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFit {
    /// Root-mean-square distance of edge crossings from each edge's
    /// least-squares line, in pixels.
    pub rms: f64,
    pub edges: usize,
    pub points: usize,
}

/// Finds low→high and high→low crossings of `threshold` down every column,
/// groups them into edges by `edge_of(x, y)`, fits a line `y = a + b·x` per
/// edge and reports the pooled residual RMS. Edges with fewer than
/// `min_points` crossings are ignored.
pub fn edge_fit(
    width: usize,
    height: usize,
    value: impl Fn(usize, usize) -> Option<f32>,
    threshold: f32,
    edge_of: impl Fn(usize, f64) -> i64,
    min_points: usize,
) -> EdgeFit {
    let mut groups: std::collections::BTreeMap<i64, Vec<(f64, f64)>> = Default::default();
    for x in 0..width {
        for y in 0..height.saturating_sub(1) {
            let (Some(a), Some(b)) = (value(x, y), value(x, y + 1)) else {
                continue;
            };
            if (a < threshold) != (b < threshold) {
                let t = ((threshold - a) / (b - a)) as f64;
                let ye = y as f64 + 0.5 + t;
                groups.entry(edge_of(x, ye)).or_default().push((x as f64 + 0.5, ye));
            }
        }
    }
    let mut sum2 = 0.0;
    let mut points = 0;
    let mut edges = 0;
    for pts in groups.values().filter(|p| p.len() >= min_points) {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        for p in pts {
            let r = p.1 - (my + slope * (p.0 - mx));
            // perpendicular distance
            sum2 += r * r / (1.0 + slope * slope);
        }
        points += pts.len();
        edges += 1;
    }
    EdgeFit {
        rms: if points > 0 { (sum2 / points as f64).sqrt() } else { f64::NAN },
        edges,
        points,
    }
}

/// Absolute differences between rendered values and the scene at pixel
/// centers, for covered pixels at least `edge_margin` meters from a scene
/// discontinuity.
pub fn closure_errors(
    values: &[f32],
    covered: impl Fn(usize) -> bool,
    view: &ViewWindow,
    scene: &SyntheticScene,
    band: usize,
    bands: usize,
    edge_margin: f64,
) -> Vec<f64> {
    let w = view.width();
    let mut out = Vec::new();
    for (i, v) in values.iter().enumerate() {
        if !covered(i) {
            continue;
        }
        let (n, e) = view.pixel_center(i % w, i / w);
        if scene.edge_distance(n, e) < edge_margin {
            continue;
        }
        out.push((*v as f64 - scene.band_value(n, e, band, bands)).abs());
    }
    out
}
