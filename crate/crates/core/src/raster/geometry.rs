use rayon::prelude::*;

use super::coverage::Triangle;
use super::view::ViewWindow;
use super::{RasterError, Result};
use crate::mesh::FootprintMesh;

/// Rows per independently rendered partition.
pub const PARTITION_ROWS: usize = 32;

/// Which cube, line and sample an output pixel reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lookup {
    /// Position of the cube's mesh in the rendered list.
    pub cube: u32,
    pub line: u32,
    pub sample: u32,
}

impl Lookup {
    pub const NONE: Lookup = Lookup {
        cube: u32::MAX,
        line: 0,
        sample: 0,
    };

    #[inline]
    pub fn is_covered(&self) -> bool {
        self.cube != u32::MAX
    }
}

/// One covered pixel of one triangle, before overwrite resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    /// Window-local pixel.
    pub x: usize,
    pub y: usize,
    /// Perspective-correct continuous sample coordinate in `[0, S]`.
    pub sample_coord: f64,
    pub line: usize,
    pub depth: f64,
    pub triangle: usize,
}

/// Per-pixel lookups for a window; row-major, `Lookup::NONE` where uncovered.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBuffer {
    pub view: ViewWindow,
    pub lookups: Vec<Lookup>,
}

impl GeometryBuffer {
    pub fn covered_count(&self) -> usize {
        self.lookups.iter().filter(|l| l.is_covered()).count()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Lookup {
        self.lookups[y * self.view.width() + x]
    }
}

/// A mesh triangle in global pixel space with its interpolation inputs.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedTriangle {
    tri: Triangle,
    /// Depth times sample coordinate, and depth, per wound vertex.
    su: [f64; 3],
    s: [f64; 3],
    samples: usize,
    line: u32,
    cube: u32,
    index: u32,
    rows: (i64, i64),
    cols: (f64, f64),
}

impl PreparedTriangle {
    /// Continuous sample coordinate and depth at `p`, if owned.
    ///
    /// With ground-plane barycentrics `λ` and ray extension factors `s`, the
    /// point of the camera line seen at `p` has sample coordinate
    /// `Σλ·s·u / Σλ·s`; the depth itself is affine on the ground plane.
    #[inline]
    fn interpolate(&self, p: [f64; 2]) -> Option<(f64, f64)> {
        let w = self.tri.weights(p)?;
        let num = w[0] * self.su[0] + w[1] * self.su[1] + w[2] * self.su[2];
        let den = w[0] * self.s[0] + w[1] * self.s[1] + w[2] * self.s[2];
        let sum = w[0] + w[1] + w[2];
        Some((num / den, den / sum))
    }

    #[inline]
    fn sample_index(&self, u: f64) -> u32 {
        let i = u.floor();
        if i <= 0.0 || i.is_nan() {
            0
        } else {
            (i as usize).min(self.samples - 1) as u32
        }
    }
}

pub(crate) fn prepare(mesh: &FootprintMesh, cube: u32, view: &ViewWindow, out: &mut Vec<PreparedTriangle>) {
    if mesh.samples == 0 {
        return;
    }
    let px: Vec<[f64; 2]> = mesh
        .vertices
        .iter()
        .map(|v| {
            let (x, y) = view.to_global(v.north, v.east);
            [x, y]
        })
        .collect();
    let (wx0, wy0) = view.origin();
    let (wx1, wy1) = (wx0 + view.width() as i64, wy0 + view.height() as i64);
    for t in 0..mesh.triangle_count() {
        let (idx, line) = mesh.triangle(t);
        let Some(tri) = Triangle::new([px[idx[0]], px[idx[1]], px[idx[2]]]) else {
            continue;
        };
        let rows = tri.row_range();
        let rows = (rows.0.max(wy0), rows.1.min(wy1));
        let (bx0, _, bx1, _) = tri.bbox();
        if rows.0 >= rows.1 || bx1 < wx0 as f64 - 1.0 || bx0 > wx1 as f64 + 1.0 {
            continue;
        }
        let vi = tri.order.map(|k| idx[k]);
        let s = vi.map(|v| mesh.vertices[v].depth);
        let su = [0, 1, 2].map(|k| s[k] * mesh.vertex_sample(vi[k]));
        out.push(PreparedTriangle {
            tri,
            su,
            s,
            samples: mesh.samples,
            line: line as u32,
            cube,
            index: t as u32,
            rows,
            cols: (bx0, bx1),
        });
    }
}

/// Rasterizes meshes in order into one lookup buffer; later meshes overwrite
/// earlier ones. Rows are split into fixed partitions rendered in parallel,
/// each touching only its own pixels, so the result doesn't depend on the
/// worker count. `cancelled` is polled between partitions.
pub fn rasterize(
    meshes: &[&FootprintMesh],
    view: &ViewWindow,
    cancelled: &(dyn Fn() -> bool + Sync),
) -> Result<GeometryBuffer> {
    let mut prepared = Vec::new();
    for (i, m) in meshes.iter().enumerate() {
        prepare(m, i as u32, view, &mut prepared);
    }
    let (wx0, wy0) = view.origin();
    let width = view.width();
    let parts = view.height().div_ceil(PARTITION_ROWS);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); parts];
    for (i, t) in prepared.iter().enumerate() {
        let first = ((t.rows.0 - wy0) as usize) / PARTITION_ROWS;
        let last = ((t.rows.1 - 1 - wy0) as usize) / PARTITION_ROWS;
        for bin in &mut bins[first..=last] {
            bin.push(i as u32);
        }
    }

    let mut lookups = vec![Lookup::NONE; view.len()];
    lookups
        .par_chunks_mut(PARTITION_ROWS * width)
        .zip(bins.par_iter())
        .enumerate()
        .try_for_each(|(part, (chunk, bin))| {
            if cancelled() {
                return Err(RasterError::Cancelled);
            }
            let row0 = wy0 + (part * PARTITION_ROWS) as i64;
            let row1 = row0 + (chunk.len() / width) as i64;
            for &ti in bin {
                let t = &prepared[ti as usize];
                for y in t.rows.0.max(row0)..t.rows.1.min(row1) {
                    let (c0, c1) = t.tri.span(y);
                    let c0 = c0.max(wx0).max(t.cols.0.floor() as i64 - 1);
                    let c1 = c1.min(wx0 + width as i64).min(t.cols.1.ceil() as i64 + 1);
                    let yc = y as f64 + 0.5;
                    let row = &mut chunk[(y - row0) as usize * width..][..width];
                    for x in c0..c1 {
                        if let Some((u, _)) = t.interpolate([x as f64 + 0.5, yc]) {
                            row[(x - wx0) as usize] = Lookup {
                                cube: t.cube,
                                line: t.line,
                                sample: t.sample_index(u),
                            };
                        }
                    }
                }
            }
            Ok(())
        })?;
    Ok(GeometryBuffer {
        view: *view,
        lookups,
    })
}

/// Every fragment of one mesh in triangle order, without overwrite
/// resolution. For coverage and interpolation checks.
pub fn fragments(mesh: &FootprintMesh, view: &ViewWindow) -> Vec<Fragment> {
    let mut prepared = Vec::new();
    prepare(mesh, 0, view, &mut prepared);
    let (wx0, wy0) = view.origin();
    let width = view.width() as i64;
    let mut out = Vec::new();
    for t in &prepared {
        for y in t.rows.0..t.rows.1 {
            let (c0, c1) = t.tri.span(y);
            for x in c0.max(wx0)..c1.min(wx0 + width) {
                if let Some((u, depth)) = t.interpolate([x as f64 + 0.5, y as f64 + 0.5]) {
                    out.push(Fragment {
                        x: (x - wx0) as usize,
                        y: (y - wy0) as usize,
                        sample_coord: u,
                        line: t.line as usize,
                        depth,
                        triangle: t.index as usize,
                    });
                }
            }
        }
    }
    out
}
