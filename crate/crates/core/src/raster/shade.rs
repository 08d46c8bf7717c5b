use rayon::prelude::*;

use super::geometry::{GeometryBuffer, PARTITION_ROWS};
use crate::calibration::{BandCalibration, StretchBounds};

/// One cube's band plane and calibration for a shading pass.
#[derive(Debug, Clone, Copy)]
pub struct ShadeSource<'a> {
    /// Line-major band values, `lines × samples`.
    pub plane: &'a [f32],
    pub samples: usize,
    pub calib: BandCalibration<'a>,
}

/// Fills `out` with calibrated values for every pixel of `geom`.
///
/// `sources[c]` belongs to the `c`-th rendered mesh; `None` marks a cube
/// whose band isn't available yet and yields `pending`.
pub fn shade_band(
    geom: &GeometryBuffer,
    sources: &[Option<ShadeSource<'_>>],
    uncovered: f32,
    pending: f32,
    out: &mut [f32],
) {
    let width = geom.view.width();
    assert_eq!(out.len(), geom.lookups.len());
    let chunk = PARTITION_ROWS * width;
    out.par_chunks_mut(chunk)
        .zip(geom.lookups.par_chunks(chunk))
        .for_each(|(out, lookups)| {
            for (o, l) in out.iter_mut().zip(lookups) {
                *o = if !l.is_covered() {
                    uncovered
                } else {
                    match &sources[l.cube as usize] {
                        Some(src) => {
                            let (line, sample) = (l.line as usize, l.sample as usize);
                            src.calib.apply(src.plane[line * src.samples + sample], line, sample)
                        }
                        None => pending,
                    }
                };
            }
        });
}

pub const UNCOVERED: u8 = 0;
pub const COVERED: u8 = 1;
/// Covered by a cube whose band data isn't loaded yet.
pub const PENDING: u8 = 2;

/// Shaded channels plus per-pixel coverage state.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelBuffer {
    pub width: usize,
    pub height: usize,
    /// One row-major plane per channel; `NaN` where not covered.
    pub channels: Vec<Vec<f32>>,
    pub coverage: Vec<u8>,
}

impl PixelBuffer {
    /// Shades each channel; `sources[channel][cube]`.
    pub fn shade(geom: &GeometryBuffer, sources: &[Vec<Option<ShadeSource<'_>>>]) -> Self {
        let n = geom.lookups.len();
        let channels = sources
            .iter()
            .map(|src| {
                let mut out = vec![0.0; n];
                shade_band(geom, src, f32::NAN, f32::NAN, &mut out);
                out
            })
            .collect();
        let coverage = geom
            .lookups
            .iter()
            .map(|l| {
                if !l.is_covered() {
                    UNCOVERED
                } else if sources.iter().all(|s| s[l.cube as usize].is_some()) {
                    COVERED
                } else {
                    PENDING
                }
            })
            .collect();
        PixelBuffer {
            width: geom.view.width(),
            height: geom.view.height(),
            channels,
            coverage,
        }
    }

    pub fn count(&self, state: u8) -> usize {
        self.coverage.iter().filter(|&&c| c == state).count()
    }

    /// Values of fully covered pixels, per channel.
    pub fn covered_values(&self) -> Vec<Vec<f32>> {
        self.channels
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&self.coverage)
                    .filter(|(_, &s)| s == COVERED)
                    .map(|(v, _)| *v)
                    .collect()
            })
            .collect()
    }

    /// 8-bit RGBA. Covered pixels are stretched and opaque; pending pixels
    /// are opaque mid-gray; uncovered pixels are transparent. A single
    /// channel is shown as gray.
    pub fn to_rgba(&self, stretch: &StretchBounds) -> Vec<u8> {
        let mut out = vec![0u8; self.width * self.height * 4];
        let k = self.channels.len();
        for (i, px) in out.chunks_exact_mut(4).enumerate() {
            match self.coverage[i] {
                COVERED => {
                    for c in 0..3 {
                        let ch = c.min(k - 1);
                        px[c] = stretch.to_u8(ch.min(stretch.channels.len() - 1), self.channels[ch][i]);
                    }
                    px[3] = 255;
                }
                PENDING => px.copy_from_slice(&[128, 128, 128, 255]),
                _ => {}
            }
        }
        out
    }
}
