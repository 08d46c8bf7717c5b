//! Radiometric calibration and display stretch.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use swathcube::calibration::{
    calibrate, compute_response, nearest_band, stretch_bounds, CalibrationMode, CalibrationSet, Calibrator,
    IlluminationSpectrum, ResponseCurve, StretchMethod, StretchMode,
};
use swathcube::cube_io::{CaptureSettings, CubeHeader, DataType};

const REFERENCE: CaptureSettings = CaptureSettings {
    framerate: 249.0,
    exposure: 0.0078,
    gain: 1.0,
};

const CAPTURE: CaptureSettings = CaptureSettings {
    framerate: 249.0,
    exposure: 0.0039,
    gain: 1.0,
};

fn random_set(rng: &mut StdRng, samples: usize, bands: usize) -> CalibrationSet {
    let n = samples * bands;
    let dark = (0..n).map(|_| rng.random_range(50.0..150.0f32).round()).collect();
    let rad = (0..n).map(|_| rng.random_range(0.2..3.0f32)).collect();
    CalibrationSet::new(samples, bands, dark, rad, REFERENCE).unwrap()
}

fn header(samples: usize, lines: usize, bands: usize) -> CubeHeader {
    let mut h = CubeHeader::new(samples, lines, bands, DataType::U16);
    h.settings = Some(CAPTURE);
    h
}

#[test]
fn equation_one_by_hand() {
    let set = CalibrationSet::new(1, 1, vec![100.0], vec![2.0], REFERENCE).unwrap();
    let unit = ResponseCurve::uniform(1, 1.0);
    assert_eq!(calibrate(150.0, 0, 0, 0, Some(&set), &unit, CalibrationMode::Radiance), 100.0);
    assert_eq!(calibrate(100.0, 0, 0, 0, Some(&set), &unit, CalibrationMode::Radiance), 0.0);
    // disabled calibration fixes dark = 0, rad = 1, response = 1
    let half = ResponseCurve::uniform(1, 0.5);
    assert_eq!(calibrate(150.0, 0, 0, 0, Some(&set), &half, CalibrationMode::Raw), 150.0);
    assert_eq!(calibrate(150.0, 0, 0, 0, None, &half, CalibrationMode::Raw), 150.0);
    // relative mode keeps only the response
    assert_eq!(calibrate(150.0, 0, 0, 0, Some(&set), &half, CalibrationMode::Relative), 300.0);
}

#[test]
fn response_follows_exposure_and_gain() {
    assert_eq!(compute_response(&REFERENCE, &REFERENCE).unwrap(), 1.0);
    assert!((compute_response(&CAPTURE, &REFERENCE).unwrap() - 0.5).abs() < 1e-12);
    let doubled = CaptureSettings { exposure: 0.0156, ..REFERENCE };
    assert!((compute_response(&doubled, &REFERENCE).unwrap() - 2.0).abs() < 1e-12);
    let gain = CaptureSettings { gain: 3.0, ..REFERENCE };
    assert!((compute_response(&gain, &REFERENCE).unwrap() - 3.0).abs() < 1e-12);
    let zero = CaptureSettings { exposure: 0.0, ..REFERENCE };
    assert!(compute_response(&zero, &REFERENCE).is_err());
}

#[test]
fn modes_form_a_lattice() {
    let mut rng = StdRng::seed_from_u64(47);
    let (samples, lines, bands) = (32, 10, 6);
    let set = Arc::new(random_set(&mut rng, samples, bands));
    let h = header(samples, lines, bands);
    let raw = Calibrator::new(CalibrationMode::Raw, &h, "c", Some(set.clone()), None).unwrap();
    let rel = Calibrator::new(CalibrationMode::Relative, &h, "c", Some(set.clone()), None).unwrap();
    let rad = Calibrator::new(CalibrationMode::Radiance, &h, "c", Some(set.clone()), None).unwrap();
    assert!(raw.band(0).is_identity());
    for band in 0..bands {
        let (dark, coef) = (set.dark_line(band), set.rad_line(band));
        for _ in 0..500 {
            let (line, sample) = (rng.random_range(0..lines), rng.random_range(0..samples));
            let x = rng.random_range(0..4096u32) as f32;
            let resp = 0.5f32;
            assert_eq!(raw.band(band).apply(x, line, sample), x);
            assert_eq!(rel.band(band).apply(x, line, sample), x / resp);
            assert_eq!(rad.band(band).apply(x, line, sample), (x - dark[sample]) * coef[sample] / resp);
            let free = calibrate(x, band, line, sample, Some(&set), rad.response(), CalibrationMode::Radiance);
            assert_eq!(rad.band(band).apply(x, line, sample).to_bits(), free.to_bits());
        }
    }
}

#[test]
fn modes_check_their_inputs() {
    let mut rng = StdRng::seed_from_u64(53);
    let set = Arc::new(random_set(&mut rng, 8, 3));
    assert!(Calibrator::new(CalibrationMode::Radiance, &header(8, 2, 3), "c", None, None).is_err());
    assert!(Calibrator::new(CalibrationMode::Relative, &header(8, 2, 3), "c", None, None).is_err());
    assert!(Calibrator::new(CalibrationMode::Raw, &header(8, 2, 3), "c", None, None).is_ok());
    assert!(Calibrator::new(CalibrationMode::Radiance, &header(9, 2, 3), "c", Some(set.clone()), None).is_err());
    assert!(Calibrator::new(CalibrationMode::Radiance, &header(8, 2, 4), "c", Some(set.clone()), None).is_err());
    assert!(Calibrator::new(CalibrationMode::Reflectance, &header(8, 2, 3), "c", Some(set.clone()), None).is_err());
    let mut no_settings = header(8, 2, 3);
    no_settings.settings = None;
    assert!(Calibrator::new(CalibrationMode::Radiance, &no_settings, "c", Some(set), None).is_err());
}

#[test]
fn scaling_rad_by_a_power_of_two_scales_radiance_exactly() {
    let mut rng = StdRng::seed_from_u64(59);
    let (samples, bands) = (16, 4);
    let set = random_set(&mut rng, samples, bands);
    let resp = ResponseCurve::uniform(4, 0.5);
    for c in [0.25f32, 2.0, 8.0] {
        let dark: Vec<f32> = (0..bands).flat_map(|b| set.dark_line(b).to_vec()).collect();
        let rad: Vec<f32> = (0..bands).flat_map(|b| set.rad_line(b).iter().map(|r| r * c).collect::<Vec<_>>()).collect();
        let scaled = CalibrationSet::new(samples, bands, dark, rad, REFERENCE).unwrap();
        for _ in 0..1000 {
            let (b, s, l) = (rng.random_range(0..bands), rng.random_range(0..samples), rng.random_range(0..4));
            let x = rng.random_range(0..4096u32) as f32;
            let base = calibrate(x, b, l, s, Some(&set), &resp, CalibrationMode::Radiance);
            let got = calibrate(x, b, l, s, Some(&scaled), &resp, CalibrationMode::Radiance);
            assert_eq!(got, base * c);
        }
    }
}

#[test]
fn radiance_is_affine_in_raw() {
    // dark and rad chosen so every intermediate is exact in f32
    let set = CalibrationSet::new(1, 1, vec![64.0], vec![0.5], REFERENCE).unwrap();
    let resp = ResponseCurve::uniform(1, 0.25);
    let f = |raw: f32| calibrate(raw, 0, 0, 0, Some(&set), &resp, CalibrationMode::Radiance);
    let mut rng = StdRng::seed_from_u64(61);
    for _ in 0..1000 {
        let (x, y) = (rng.random_range(0..2000u32) as f32, rng.random_range(0..2000u32) as f32);
        let (a, b) = (rng.random_range(0..4u32) as f32, rng.random_range(0..4u32) as f32);
        // superposition on the offset-subtracted value
        let lhs = f(a * (x - 64.0) + b * (y - 64.0) + 64.0);
        assert_eq!(lhs, a * f(x) + b * f(y));
    }
}

#[test]
fn gray_panel_reads_half_reflectance() {
    let mut rng = StdRng::seed_from_u64(67);
    let (samples, bands) = (24, 5);
    let set = Arc::new(random_set(&mut rng, samples, bands));
    let h = header(samples, 3, bands);
    // panel digital numbers per band and sample, chosen so the panel's
    // radiance is uniform across samples within a band
    let panel_radiance: Vec<f32> = (0..bands).map(|b| 40.0 + 7.5 * b as f32).collect();
    let illum = IlluminationSpectrum::new(
        (0..bands).map(|b| 450.0 + 100.0 * b as f64).collect(),
        panel_radiance.iter().map(|r| r / 0.5).collect(),
    )
    .unwrap();
    let cal = Calibrator::new(CalibrationMode::Reflectance, &h, "panel", Some(set.clone()), Some(Arc::new(illum))).unwrap();
    for b in 0..bands {
        for s in 0..samples {
            let raw = panel_radiance[b] * 0.5 / set.rad_line(b)[s] + set.dark_line(b)[s];
            let r = cal.band(b).apply(raw, 1, s);
            assert!((r - 0.5).abs() < 1e-6, "band {b} sample {s}: {r}");
        }
    }
}

#[test]
fn illumination_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("illum.csv");
    std::fs::write(&path, "wavelength_nm,radiance\n400,1.5\n500,2.5\n").unwrap();
    let s = IlluminationSpectrum::load_csv(&path).unwrap();
    assert_eq!(s.radiance, vec![1.5, 2.5]);
    std::fs::write(&path, "400,1.5\n500,0\n").unwrap();
    let err = IlluminationSpectrum::load_csv(&path).unwrap_err().to_string();
    assert!(err.contains("illum.csv"), "{err}");
}

#[test]
fn calibration_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(71);
    let mut set = random_set(&mut rng, 30, 7);
    set.units = Some("uW/(cm^2 sr nm)".into());
    let path = dir.path().join("calib.raw");
    set.save(&path).unwrap();
    assert_eq!(CalibrationSet::load(&path).unwrap(), set);
}

fn exact_percentile(values: &[f32], p: f64) -> f32 {
    let mut v = values.to_vec();
    v.sort_by(f32::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank - 1]
}

#[test]
fn stretch_matches_sort_oracle() {
    let mut rng = StdRng::seed_from_u64(73);
    for _ in 0..50 {
        let n = rng.random_range(10..5000);
        let values: Vec<f32> = (0..n).map(|_| rng.random_range(-10.0..1000.0f32)).collect();
        let (lo, hi) = (exact_percentile(&values, 2.0), exact_percentile(&values, 98.0));
        let exact = stretch_bounds(&[&values], StretchMode::Common, StretchMethod::Exact, 1.0);
        assert_eq!(exact.channels[0], (lo, hi));
        let hist = stretch_bounds(&[&values], StretchMode::Common, StretchMethod::Histogram, 1.0);
        let (hlo, hhi) = hist.channels[0];
        let bin = (values.iter().copied().fold(f32::MIN, f32::max) - values.iter().copied().fold(f32::MAX, f32::min)) / 1024.0;
        assert!(hlo <= lo && lo - hlo <= bin * 1.0001, "{hlo} vs {lo}");
        assert!(hhi >= hi && hhi - hi <= bin * 1.0001, "{hhi} vs {hi}");
    }
}

#[test]
fn stretch_ignores_values_that_do_not_move_the_ranks() {
    let mut rng = StdRng::seed_from_u64(79);
    let mut values: Vec<f32> = vec![0.0; 50];
    values.extend(vec![100.0; 50]);
    values.extend((0..900).map(|_| rng.random_range(1.0..99.0f32)));
    for method in [StretchMethod::Exact, StretchMethod::Histogram] {
        let before = stretch_bounds(&[&values], StretchMode::Common, method, 1.0);
        let mut more = values.clone();
        more.extend((0..1000).map(|_| rng.random_range(1.0..99.0f32)));
        let after = stretch_bounds(&[&more], StretchMode::Common, method, 1.0);
        assert_eq!(before, after, "{method:?}");
        assert_eq!(before.channels[0], (0.0, 100.0));
    }
}

#[test]
fn per_channel_and_none_modes() {
    let a: Vec<f32> = (1..=100).map(|i| i as f32).collect();
    let b: Vec<f32> = (1..=100).map(|i| 10.0 * i as f32).collect();
    let per = stretch_bounds(&[&a, &b], StretchMode::PerChannel, StretchMethod::Exact, 1.0);
    assert_eq!(per.channels, vec![(2.0, 98.0), (20.0, 980.0)]);
    let none = stretch_bounds(&[&a, &b], StretchMode::None, StretchMethod::Exact, 65535.0);
    assert_eq!(none.channels, vec![(0.0, 65535.0); 2]);
    let constant = vec![5.0f32; 10];
    let c = stretch_bounds(&[&constant], StretchMode::Common, StretchMethod::Exact, 1.0);
    assert_eq!(c.to_u8(0, 5.0), 128);
}

#[test]
fn nearest_band_ties_go_low() {
    let wl = [400.0, 410.0, 420.0];
    assert_eq!(nearest_band(&wl, 410.0), 1);
    assert_eq!(nearest_band(&wl, 405.0), 0);
    assert_eq!(nearest_band(&wl, 2000.0), 2);
    assert_eq!(nearest_band(&wl, 0.0), 0);
}
