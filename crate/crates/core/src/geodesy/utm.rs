use std::fmt;
use std::sync::OnceLock;

use super::{GeodesyError, GeodeticPoint, NedFrame, NedPoint, Result};

const UTM_SCALE: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
const MAX_LATITUDE: f64 = 84.0;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    North,
    South,
}

impl Hemisphere {
    pub fn of_latitude(latitude: f64) -> Self {
        if latitude >= 0.0 {
            Hemisphere::North
        } else {
            Hemisphere::South
        }
    }

    /// `N` or `S`.
    pub fn letter(self) -> char {
        match self {
            Hemisphere::North => 'N',
            Hemisphere::South => 'S',
        }
    }

    fn false_northing(self) -> f64 {
        match self {
            Hemisphere::North => 0.0,
            Hemisphere::South => FALSE_NORTHING_SOUTH,
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hemisphere::North => "N",
            Hemisphere::South => "S",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UtmCoordinate {
    pub easting: f64,
    pub northing: f64,
    pub zone: u8,
    pub hemisphere: Hemisphere,
}

/// Transverse Mercator on an arbitrary ellipsoid using the 6th-order
/// Krüger series (Karney's formulation of the Snyder/Krüger expansion).
#[derive(Debug, Clone)]
pub(crate) struct TransverseMercator {
    k0: f64,
    e: f64,
    e2: f64,
    rectifying_radius: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

impl TransverseMercator {
    pub(crate) fn new(a: f64, f: f64, k0: f64) -> Self {
        let n = f / (2.0 - f);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let rectifying_radius = a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1983433.0 / 1935360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5
                + 167603.0 / 181440.0 * n6,
            49561.0 / 161280.0 * n4 - 179.0 / 168.0 * n5 + 6601661.0 / 7257600.0 * n6,
            34729.0 / 80640.0 * n5 - 3418889.0 / 1995840.0 * n6,
            212378941.0 / 319334400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604800.0 * n6,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1118711.0 / 3870720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161280.0 * n4 - 11.0 / 504.0 * n5 - 830251.0 / 7257600.0 * n6,
            4583.0 / 161280.0 * n5 - 108847.0 / 3991680.0 * n6,
            20648693.0 / 638668800.0 * n6,
        ];
        let e2 = f * (2.0 - f);
        TransverseMercator {
            k0,
            e: e2.sqrt(),
            e2,
            rectifying_radius,
            alpha,
            beta,
        }
    }

    fn wgs84_utm() -> &'static TransverseMercator {
        static TM: OnceLock<TransverseMercator> = OnceLock::new();
        TM.get_or_init(|| TransverseMercator::new(WGS84_A, WGS84_F, UTM_SCALE))
    }

    /// Returns (x, y, convergence) relative to the central meridian, with x
    /// east and y north of the equator, meters, and convergence in radians.
    pub(crate) fn forward(&self, lat: f64, dlon: f64) -> (f64, f64, f64) {
        let sin_lat = lat.sin();
        // tangent of the conformal latitude
        let tau = (sin_lat.atanh() - self.e * (self.e * sin_lat).atanh()).sinh();
        let xi_p = tau.atan2(dlon.cos());
        let eta_p = (dlon.sin() / (1.0 + tau * tau).sqrt()).atanh();

        let mut xi = xi_p;
        let mut eta = eta_p;
        let mut p = 1.0;
        let mut q = 0.0;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            let (s, c) = (k * xi_p).sin_cos();
            let (sh, ch) = ((k * eta_p).sinh(), (k * eta_p).cosh());
            xi += a * s * ch;
            eta += a * c * sh;
            p += k * a * c * ch;
            q += k * a * s * sh;
        }
        let gamma = (tau / (1.0 + tau * tau).sqrt() * dlon.tan()).atan() + q.atan2(p);
        let scale = self.k0 * self.rectifying_radius;
        (scale * eta, scale * xi, gamma)
    }

    /// Inverse of [`forward`](Self::forward): returns (lat, dlon) in radians.
    pub(crate) fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let scale = self.k0 * self.rectifying_radius;
        let xi = y / scale;
        let eta = x / scale;
        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi_p -= b * (k * xi).sin() * (k * eta).cosh();
            eta_p -= b * (k * xi).cos() * (k * eta).sinh();
        }
        let sinh_eta = eta_p.sinh();
        let (sin_xi, cos_xi) = xi_p.sin_cos();
        let dlon = sinh_eta.atan2(cos_xi);
        // tangent of the conformal latitude, then Newton for the geodetic one
        let tau_p = sin_xi / sinh_eta.hypot(cos_xi);
        let tau = self.geodetic_tan(tau_p);
        (tau.atan(), dlon)
    }

    fn conformal_tan(&self, tau: f64) -> f64 {
        let tau1 = (1.0 + tau * tau).sqrt();
        let sig = (self.e * (self.e * tau / tau1).atanh()).sinh();
        tau * (1.0 + sig * sig).sqrt() - sig * tau1
    }

    fn geodetic_tan(&self, tau_p: f64) -> f64 {
        let mut tau = tau_p / (1.0 - self.e2);
        for _ in 0..8 {
            let tp = self.conformal_tan(tau);
            let dtau = (tau_p - tp) * (1.0 + (1.0 - self.e2) * tau * tau)
                / ((1.0 - self.e2) * (1.0 + tau * tau).sqrt() * (1.0 + tp * tp).sqrt());
            tau += dtau;
            if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }
}

/// `floor(lon / 6) + 31`, clamped to `1..=60`.
pub fn natural_zone(longitude: f64) -> u8 {
    ((longitude / 6.0).floor() as i32 + 31).clamp(1, 60) as u8
}

fn central_meridian(zone: u8) -> f64 {
    f64::from(zone) * 6.0 - 183.0
}

fn check_latitude(p: &GeodeticPoint) -> Result<()> {
    p.validate()?;
    if p.latitude.abs() > MAX_LATITUDE {
        return Err(GeodesyError::UnsupportedLatitude(p.latitude));
    }
    Ok(())
}

fn check_zone(zone: u8) -> Result<()> {
    if (1..=60).contains(&zone) {
        Ok(())
    } else {
        Err(GeodesyError::InvalidZone(i32::from(zone)))
    }
}

/// Wraps a longitude difference into [-180, 180).
fn wrap_degrees(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

/// Projects `p` onto UTM. Without an explicit zone the natural zone of `p`
/// is used; the hemisphere always follows the sign of the latitude.
pub fn wgs84_to_utm(p: &GeodeticPoint, zone: Option<u8>) -> Result<UtmCoordinate> {
    let zone = zone.unwrap_or_else(|| natural_zone(p.longitude));
    wgs84_to_utm_in(p, zone, Hemisphere::of_latitude(p.latitude))
}

/// Projects `p` into a fixed zone and hemisphere, as used when a whole
/// collection shares one grid.
pub fn wgs84_to_utm_in(p: &GeodeticPoint, zone: u8, hemisphere: Hemisphere) -> Result<UtmCoordinate> {
    check_latitude(p)?;
    check_zone(zone)?;
    let dlon = wrap_degrees(p.longitude - central_meridian(zone)).to_radians();
    let (x, y, _) = TransverseMercator::wgs84_utm().forward(p.latitude.to_radians(), dlon);
    let easting = x + FALSE_EASTING;
    if !(easting > 0.0 && easting < 1_000_000.0) {
        return Err(GeodesyError::OutOfZone { easting, zone });
    }
    Ok(UtmCoordinate {
        easting,
        northing: y + hemisphere.false_northing(),
        zone,
        hemisphere,
    })
}

/// Inverse projection. Altitude is passed through unchanged.
pub fn utm_to_wgs84(u: &UtmCoordinate, altitude: f64) -> Result<GeodeticPoint> {
    check_zone(u.zone)?;
    let (lat, dlon) = TransverseMercator::wgs84_utm().inverse(
        u.easting - FALSE_EASTING,
        u.northing - u.hemisphere.false_northing(),
    );
    let longitude = wrap_degrees(central_meridian(u.zone) + dlon.to_degrees());
    GeodeticPoint::new(lat.to_degrees(), longitude, altitude)
}

/// Clockwise angle from true north to grid north at `p`, in degrees.
pub fn grid_convergence(p: &GeodeticPoint, zone: u8) -> Result<f64> {
    check_latitude(p)?;
    check_zone(zone)?;
    let dlon = wrap_degrees(p.longitude - central_meridian(zone)).to_radians();
    let (_, _, gamma) = TransverseMercator::wgs84_utm().forward(p.latitude.to_radians(), dlon);
    Ok(gamma.to_degrees())
}

/// Result of [`select_zone`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSelection {
    pub zone: u8,
    pub hemisphere: Hemisphere,
    /// Every natural zone touched by the track, ascending.
    pub spanned_zones: Vec<u8>,
}

impl ZoneSelection {
    /// True when the track leaves the chosen zone.
    pub fn straddles(&self) -> bool {
        self.spanned_zones.len() > 1
    }
}

/// Picks one zone for a whole collection: the zone of the track centroid.
/// A centroid exactly on a zone boundary goes to the lower-numbered zone.
pub fn select_zone(track: &[GeodeticPoint]) -> Result<ZoneSelection> {
    if track.is_empty() {
        return Err(GeodesyError::EmptyTrack);
    }
    for p in track {
        check_latitude(p)?;
    }
    let n = track.len() as f64;
    let lat = track.iter().map(|p| p.latitude).sum::<f64>() / n;
    let lon = track.iter().map(|p| p.longitude).sum::<f64>() / n;

    let ratio = lon / 6.0;
    let mut zone = natural_zone(lon);
    if ratio == ratio.floor() && zone > 1 {
        zone -= 1;
    }

    let mut spanned: Vec<u8> = track.iter().map(|p| natural_zone(p.longitude)).collect();
    spanned.push(zone);
    spanned.sort_unstable();
    spanned.dedup();
    if spanned.len() > 1 {
        log::warn!(
            "track spans UTM zones {:?}; projecting everything into zone {}",
            spanned,
            zone
        );
    }
    Ok(ZoneSelection {
        zone,
        hemisphere: Hemisphere::of_latitude(lat),
        spanned_zones: spanned,
    })
}

/// Expresses a UTM position in the collection's NED frame.
pub fn to_ned(u: &UtmCoordinate, altitude: f64, frame: &NedFrame) -> Result<NedPoint> {
    if u.zone != frame.zone || u.hemisphere != frame.hemisphere {
        return Err(GeodesyError::ZoneMismatch {
            point_zone: u.zone,
            point_hemisphere: u.hemisphere,
            origin_zone: frame.zone,
            origin_hemisphere: frame.hemisphere,
        });
    }
    Ok(NedPoint {
        north: u.northing - frame.origin_northing,
        east: u.easting - frame.origin_easting,
        down: frame.origin_altitude - altitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeodeticPoint {
        GeodeticPoint::new(lat, lon, 0.0).unwrap()
    }

    #[test]
    fn memphis_zone() {
        let u = wgs84_to_utm(&pt(35.1175, -89.9711), None).unwrap();
        assert_eq!(u.zone, 16);
        assert_eq!(u.hemisphere, Hemisphere::North);
    }

    #[test]
    fn central_meridian_has_false_easting() {
        for lat in [-60.0, -10.0, 0.0, 35.0, 83.0] {
            let u = wgs84_to_utm(&pt(lat, -87.0), Some(16)).unwrap();
            assert_eq!(u.easting, 500_000.0);
        }
    }

    #[test]
    fn rejects_polar_latitudes() {
        assert!(matches!(
            wgs84_to_utm(&pt(84.5, 10.0), None),
            Err(GeodesyError::UnsupportedLatitude(_))
        ));
        assert!(matches!(
            wgs84_to_utm(&pt(-85.0, 10.0), None),
            Err(GeodesyError::UnsupportedLatitude(_))
        ));
        assert!(GeodeticPoint::new(91.0, 0.0, 0.0).is_err());
        assert!(GeodeticPoint::new(0.0, 180.0, 0.0).is_err());
    }

    #[test]
    fn snyder_worked_example_clarke_1866() {
        // Clarke 1866: a = 6378206.4 m, e² = 0.00676866; 40°30'N 73°30'W,
        // central meridian 75°W. Published result x = 127106.5, y = 4484124.4.
        let e2: f64 = 0.00676866;
        let f = 1.0 - (1.0 - e2).sqrt();
        let tm = TransverseMercator::new(6_378_206.4, f, 0.9996);
        let (x, y, _) = tm.forward(40.5f64.to_radians(), 1.5f64.to_radians());
        assert!((x - 127_106.5).abs() < 0.05, "x = {x}");
        assert!((y - 4_484_124.4).abs() < 0.05, "y = {y}");
    }

    #[test]
    fn convergence_signs() {
        assert_eq!(grid_convergence(&pt(35.0, -87.0), 16).unwrap(), 0.0);
        assert!(grid_convergence(&pt(35.0, -85.0), 16).unwrap() > 0.0);
        assert!(grid_convergence(&pt(35.0, -89.0), 16).unwrap() < 0.0);
        assert!(grid_convergence(&pt(-35.0, -85.0), 16).unwrap() < 0.0);
    }

    #[test]
    fn zone_selection() {
        let in16 = [pt(35.1, -89.9), pt(35.2, -88.0), pt(35.0, -86.5)];
        let z = select_zone(&in16).unwrap();
        assert_eq!((z.zone, z.straddles()), (16, false));

        // centroid exactly on the 15/16 boundary
        let boundary = [pt(35.0, -90.5), pt(35.0, -89.5)];
        assert_eq!(select_zone(&boundary).unwrap().zone, 15);

        // straddles 16/17 (boundary at -84°), centroid inside 16
        let straddle = [pt(35.0, -84.8), pt(35.0, -84.4), pt(35.0, -83.9)];
        let z = select_zone(&straddle).unwrap();
        assert_eq!(z.zone, 16);
        assert!(z.straddles());
        assert_eq!(z.spanned_zones, vec![16, 17]);

        assert_eq!(select_zone(&[]), Err(GeodesyError::EmptyTrack));
    }

    #[test]
    fn ned_axes_and_signs() {
        let frame = NedFrame {
            zone: 16,
            hemisphere: Hemisphere::North,
            origin_easting: 230_000.0,
            origin_northing: 3_890_000.0,
            origin_altitude: 95.0,
            convergence_deg: 0.0,
        };
        let origin = UtmCoordinate {
            easting: 230_000.0,
            northing: 3_890_000.0,
            zone: 16,
            hemisphere: Hemisphere::North,
        };
        assert_eq!(to_ned(&origin, 95.0, &frame).unwrap(), NedPoint::new(0.0, 0.0, 0.0));
        assert_eq!(to_ned(&origin, 105.0, &frame).unwrap().down, -10.0);
        let moved = UtmCoordinate {
            easting: 230_005.0,
            northing: 3_890_007.0,
            ..origin
        };
        let n = to_ned(&moved, 95.0, &frame).unwrap();
        assert_eq!((n.north, n.east), (7.0, 5.0));

        let other = UtmCoordinate { zone: 17, ..origin };
        assert!(matches!(
            to_ned(&other, 95.0, &frame),
            Err(GeodesyError::ZoneMismatch { .. })
        ));
    }
}
