use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use rayon::prelude::*;

use super::collection::{cubes_used, Collection};
use super::config::{CubeRange, Wavelengths};
use super::{JobError, Result};
use crate::calibration::CalibrationMode;
use crate::cube_io::{BandPlane, CubeHeader, CubeWriter, DataType};
use crate::raster::{shade_band, ShadeSource, ViewWindow};

/// Header key recording the collection frame of an export.
pub const NED_ORIGIN_KEY: &str = "sc ned origin";

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    pub gsd: f64,
    pub wavelengths: Wavelengths,
    pub mode: CalibrationMode,
    pub range: Option<CubeRange>,
    pub no_data: f32,
    pub data_type: DataType,
    pub mask: bool,
}

/// Wall time per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    /// Headers, pose log and band reads.
    pub load: Duration,
    pub mesh: Duration,
    /// Geometry and shading.
    pub render: Duration,
    pub write: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.load + self.mesh + self.render + self.write
    }

    /// `stage=<name> wall_ms=<ms>` lines, one per stage, then the total.
    pub fn report(&self) -> String {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let mut s = String::new();
        for (name, d) in [
            ("load", self.load),
            ("mesh", self.mesh),
            ("render", self.render),
            ("write", self.write),
            ("total", self.total()),
        ] {
            s.push_str(&format!("stage={name} wall_ms={:.1}\n", ms(d)));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportReport {
    pub header: PathBuf,
    pub data: PathBuf,
    pub mask: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub wavelengths: Vec<f64>,
    pub covered_pixels: usize,
    pub timings: StageTimings,
}

/// Output wavelengths: the first selected cube's, or the requested list.
pub fn output_wavelengths(c: &Collection, selection: &[usize], w: &Wavelengths) -> Vec<f64> {
    match w {
        Wavelengths::List(v) => v.clone(),
        Wavelengths::All => {
            let h = c.cubes()[selection[0]].header();
            if h.wavelengths.is_empty() {
                (0..h.bands).map(|b| b as f64).collect()
            } else {
                h.wavelengths.clone()
            }
        }
    }
}

impl Collection {
    /// Renders the selected cubes onto a north-up grid at `opts.gsd` and
    /// streams one band at a time to an ENVI cube at `output`. Cubes that
    /// own no output pixel are never read.
    pub fn export(
        &self,
        opts: &ExportOptions,
        output: &Path,
        progress: &mut dyn FnMut(usize, usize),
        cancelled: &(dyn Fn() -> bool + Sync),
    ) -> Result<ExportReport> {
        let mut timings = StageTimings::default();
        let selection = self.selected(opts.range)?;
        let bounds = self.bounds(opts.range)?;
        let view = ViewWindow::covering(&bounds, opts.gsd)?;
        let calibrators = self.calibrators(opts.mode)?;
        let wavelengths = output_wavelengths(self, &selection, &opts.wavelengths);

        let t = Instant::now();
        let geom = self.geometry(&view, &selection, cancelled)?;
        let used = cubes_used(&geom, selection.len());
        timings.render += t.elapsed();
        info!(
            "export grid {}×{} at {} m, {} of {} cubes visible, {} bands",
            view.width(),
            view.height(),
            opts.gsd,
            used.iter().filter(|u| **u).count(),
            selection.len(),
            wavelengths.len()
        );

        let mut header = CubeHeader::new(view.width(), view.height(), wavelengths.len(), opts.data_type);
        header.wavelengths = wavelengths.clone();
        header.wavelength_units = self.cubes()[selection[0]].header().wavelength_units.clone();
        header.map_info = Some(view.map_info(self.frame()));
        header.data_ignore_value = Some(opts.no_data as f64);
        header.description = Some(format!(
            "georectified mosaic, {} mode, {} cubes",
            opts.mode.as_str(),
            selection.len()
        ));
        let f = self.frame();
        header.set_extra(
            NED_ORIGIN_KEY,
            format!(
                "{{{:.4}, {:.4}, {:.4}, {:.8}}}",
                f.origin_easting, f.origin_northing, f.origin_altitude, f.convergence_deg
            ),
        );
        header.set_extra("sc ground altitude", format!("{:.4}", self.ground().altitude));

        let t = Instant::now();
        let mut writer = CubeWriter::create(output, header)?;
        timings.write += t.elapsed();
        let mut out = vec![0f32; view.len()];
        for (k, &w) in wavelengths.iter().enumerate() {
            if cancelled() {
                writer.abort();
                return Err(JobError::Cancelled);
            }
            let t = Instant::now();
            let planes: Vec<Option<(BandPlane, usize)>> = selection
                .par_iter()
                .zip(&used)
                .map(|(&c, &u)| {
                    if !u {
                        return Ok(None);
                    }
                    let b = self.band_index(c, w);
                    Ok(Some((self.cubes()[c].read_band(b)?, b)))
                })
                .collect::<Result<_>>()?;
            timings.load += t.elapsed();

            let t = Instant::now();
            let sources: Vec<Option<ShadeSource>> = planes
                .iter()
                .zip(&selection)
                .map(|(p, &c)| {
                    p.as_ref().map(|(plane, b)| ShadeSource {
                        plane: plane.values(),
                        samples: plane.samples,
                        calib: calibrators[c].band(*b),
                    })
                })
                .collect();
            shade_band(&geom, &sources, opts.no_data, opts.no_data, &mut out);
            timings.render += t.elapsed();

            let t = Instant::now();
            writer.write_band(&out)?;
            timings.write += t.elapsed();
            progress(k + 1, wavelengths.len());
        }
        let t = Instant::now();
        let (hdr, data) = writer.finish()?;
        let mask = if opts.mask {
            let mask_path = mask_path_for(&data);
            let mut h = CubeHeader::new(view.width(), view.height(), 1, DataType::U8);
            h.map_info = Some(view.map_info(self.frame()));
            h.description = Some("coverage mask, 1 = covered".into());
            let mask: Vec<f32> = geom.lookups.iter().map(|l| l.is_covered() as u8 as f32).collect();
            crate::cube_io::write_cube(&mask_path, h, &[mask])?;
            Some(mask_path)
        } else {
            None
        };
        timings.write += t.elapsed();
        Ok(ExportReport {
            header: hdr,
            data,
            mask,
            width: view.width(),
            height: view.height(),
            bands: wavelengths.len(),
            wavelengths,
            covered_pixels: geom.covered_count(),
            timings,
        })
    }
}

/// `<stem>_mask.<ext>` next to the data file.
pub fn mask_path_for(data: &Path) -> PathBuf {
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    let name = match data.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_mask.{ext}"),
        None => format!("{stem}_mask"),
    };
    data.with_file_name(name)
}
