//! Inverse georectification of pushbroom hyperspectral datacubes.
//!
//! Each cube's ground footprint is turned into a strip of quads (one per
//! line exposure) and rasterized onto a north-up map grid. Every covered
//! output pixel computes which `(line, sample)` it came from, so the result
//! has no coverage gaps regardless of platform motion.
//!
//! The crate is organized bottom-up:
//!
//! - [`geodesy`]: WGS84 → UTM → local NED, orientations, pose interpolation
//! - [`cube_io`]: ENVI band-sequential cubes, pose logs, the cube provider
//! - [`calibration`]: dark/radiance/response calibration and display stretch
//! - [`mesh`]: per-cube footprint meshes under a flat-ground model
//! - [`raster`]: deterministic watertight rasterizer and exporter
//! - [`job`]: collection loading and the batch export pipeline

pub mod calibration;
pub mod cube_io;
pub mod geodesy;
pub mod job;
pub mod mesh;
pub mod raster;
