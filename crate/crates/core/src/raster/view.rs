use super::{RasterError, Result};
use crate::cube_io::MapInfo;
use crate::geodesy::NedFrame;
use crate::mesh::Bounds;

/// Pixel edge length of a service tile.
pub const TILE_SIZE: usize = 256;

/// A north-up pixel window onto the NED plane.
///
/// Every window lives on a global pixel grid fixed by an anchor (the
/// north-west corner of global pixel (0, 0)) and a pixel size. The window
/// covers global pixels `x0..x0 + width`, `y0..y0 + height`. The rasterizer
/// works in global pixel coordinates, so two windows on the same grid
/// produce identical values wherever they overlap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ViewWindow {
    anchor_north: f64,
    anchor_east: f64,
    pixel_north: f64,
    pixel_east: f64,
    x0: i64,
    y0: i64,
    width: usize,
    height: usize,
}

impl ViewWindow {
    /// General constructor on an explicit grid.
    #[allow(clippy::too_many_arguments)]
    pub fn on_grid(
        anchor_north: f64,
        anchor_east: f64,
        pixel_north: f64,
        pixel_east: f64,
        x0: i64,
        y0: i64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let ok = |v: f64| v.is_finite();
        if !(pixel_north > 0.0 && pixel_east > 0.0 && ok(pixel_north) && ok(pixel_east)) {
            return Err(RasterError::InvalidView(format!(
                "pixel size must be positive, got {pixel_north} × {pixel_east}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(RasterError::InvalidView("window has no pixels".into()));
        }
        if !(ok(anchor_north) && ok(anchor_east)) {
            return Err(RasterError::InvalidView("non-finite anchor".into()));
        }
        Ok(ViewWindow {
            anchor_north,
            anchor_east,
            pixel_north,
            pixel_east,
            x0,
            y0,
            width,
            height,
        })
    }

    /// Window centered on `(north, east)` spanning `scale` meters per axis.
    pub fn from_center_scale(
        center: (f64, f64),
        scale: (f64, f64),
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(scale.0 > 0.0 && scale.1 > 0.0) {
            return Err(RasterError::InvalidView(format!(
                "scale must be positive, got {:?}",
                scale
            )));
        }
        Self::on_grid(
            center.0 + scale.0 / 2.0,
            center.1 - scale.1 / 2.0,
            scale.0 / height.max(1) as f64,
            scale.1 / width.max(1) as f64,
            0,
            0,
            width,
            height,
        )
    }

    /// Smallest window at `gsd` meters per pixel whose top-left corner is the
    /// north-west corner of `bounds` and which covers all of it.
    pub fn covering(bounds: &Bounds, gsd: f64) -> Result<Self> {
        if !(gsd > 0.0 && gsd.is_finite()) {
            return Err(RasterError::InvalidView(format!("gsd must be positive, got {gsd}")));
        }
        let cells = |extent: f64| ((extent / gsd).ceil() as usize).max(1);
        Self::on_grid(
            bounds.max_north,
            bounds.min_east,
            gsd,
            gsd,
            0,
            0,
            cells(bounds.width()),
            cells(bounds.height()),
        )
    }

    /// Pixel size of the zoom-`z` pyramid over `bounds`. Level 0 is one tile
    /// spanning the longer side of the bounds.
    pub fn tile_pixel_size(bounds: &Bounds, z: u32) -> f64 {
        let side = bounds.width().max(bounds.height());
        let side = if side > 0.0 { side } else { 1.0 };
        side / (TILE_SIZE as f64 * (1u64 << z.min(62)) as f64)
    }

    /// Tile `(tx, ty)` of zoom level `z`, anchored at the bounds' north-west
    /// corner.
    pub fn tile(bounds: &Bounds, z: u32, tx: i64, ty: i64) -> Result<Self> {
        if z > 30 {
            return Err(RasterError::InvalidView(format!("zoom {z} out of range")));
        }
        let px = Self::tile_pixel_size(bounds, z);
        let n = TILE_SIZE as i64;
        Self::on_grid(
            bounds.max_north,
            bounds.min_east,
            px,
            px,
            tx * n,
            ty * n,
            TILE_SIZE,
            TILE_SIZE,
        )
    }

    /// Sub-window at local offset `(x, y)`, on the same grid.
    pub fn crop(&self, x: i64, y: i64, width: usize, height: usize) -> Result<Self> {
        Self::on_grid(
            self.anchor_north,
            self.anchor_east,
            self.pixel_north,
            self.pixel_east,
            self.x0 + x,
            self.y0 + y,
            width,
            height,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global pixel index of the window's top-left pixel.
    pub fn origin(&self) -> (i64, i64) {
        (self.x0, self.y0)
    }

    /// Ground size of a pixel, `(north, east)` meters.
    pub fn pixel_size(&self) -> (f64, f64) {
        (self.pixel_north, self.pixel_east)
    }

    /// `(north, east)` ground extent of the whole window.
    pub fn scale(&self) -> (f64, f64) {
        (
            self.pixel_north * self.height as f64,
            self.pixel_east * self.width as f64,
        )
    }

    pub fn center(&self) -> (f64, f64) {
        let (n, e) = self.corner();
        let (sn, se) = self.scale();
        (n - sn / 2.0, e + se / 2.0)
    }

    /// North-west corner of the window, `(north, east)`.
    pub fn corner(&self) -> (f64, f64) {
        (
            self.anchor_north - self.y0 as f64 * self.pixel_north,
            self.anchor_east + self.x0 as f64 * self.pixel_east,
        )
    }

    pub fn bounds(&self) -> Bounds {
        let (n, e) = self.corner();
        let (sn, se) = self.scale();
        Bounds {
            min_north: n - sn,
            max_north: n,
            min_east: e,
            max_east: e + se,
        }
    }

    /// Global pixel coordinates of a ground point; pixel `(i, j)` spans
    /// `[i, i + 1) × [j, j + 1)` with its center at `+0.5`.
    #[inline]
    pub fn to_global(&self, north: f64, east: f64) -> (f64, f64) {
        (
            (east - self.anchor_east) / self.pixel_east,
            (self.anchor_north - north) / self.pixel_north,
        )
    }

    /// Window-local pixel coordinates of a ground point.
    pub fn to_local(&self, north: f64, east: f64) -> (f64, f64) {
        let (x, y) = self.to_global(north, east);
        (x - self.x0 as f64, y - self.y0 as f64)
    }

    /// Ground position of the center of local pixel `(x, y)`.
    pub fn pixel_center(&self, x: usize, y: usize) -> (f64, f64) {
        let gx = (self.x0 + x as i64) as f64 + 0.5;
        let gy = (self.y0 + y as i64) as f64 + 0.5;
        (
            self.anchor_north - gy * self.pixel_north,
            self.anchor_east + gx * self.pixel_east,
        )
    }

    /// ENVI map info for this window in `frame`'s UTM zone.
    pub fn map_info(&self, frame: &NedFrame) -> MapInfo {
        let (n, e) = self.corner();
        MapInfo {
            easting: frame.origin_easting + e,
            northing: frame.origin_northing + n,
            pixel_x: self.pixel_east,
            pixel_y: self.pixel_north,
            zone: frame.zone,
            hemisphere: frame.hemisphere,
        }
    }
}
