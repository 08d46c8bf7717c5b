/// Analytic ground pattern sampled by the simulated camera.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticScene {
    Constant(f64),
    /// Alternating bands of `low` and `high`, each `period / 2` wide.
    /// `normal_deg` is the bearing (from north, clockwise) across which the
    /// value changes; 0 gives edges running east-west.
    Stripes {
        period: f64,
        normal_deg: f64,
        low: f64,
        high: f64,
    },
    Checker {
        size: f64,
        low: f64,
        high: f64,
    },
    /// `base + per_north·north + per_east·east`.
    Gradient {
        base: f64,
        per_north: f64,
        per_east: f64,
    },
}

impl SyntheticScene {
    pub fn value(&self, north: f64, east: f64) -> f64 {
        match *self {
            SyntheticScene::Constant(v) => v,
            SyntheticScene::Stripes {
                period,
                normal_deg,
                low,
                high,
            } => {
                let (s, c) = normal_deg.to_radians().sin_cos();
                let x = (north * c + east * s) / period;
                if x - x.floor() < 0.5 {
                    low
                } else {
                    high
                }
            }
            SyntheticScene::Checker { size, low, high } => {
                let parity = ((north / size).floor() as i64 + (east / size).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    low
                } else {
                    high
                }
            }
            SyntheticScene::Gradient {
                base,
                per_north,
                per_east,
            } => base + per_north * north + per_east * east,
        }
    }

    /// Scene value in `band`: the pattern scaled by a smooth spectral shape,
    /// so every band is distinct but shares the geometry.
    pub fn band_value(&self, north: f64, east: f64, band: usize, bands: usize) -> f64 {
        self.value(north, east) * spectral_gain(band, bands)
    }

    /// Distance to the nearest value discontinuity; infinite for smooth
    /// scenes.
    pub fn edge_distance(&self, north: f64, east: f64) -> f64 {
        match *self {
            SyntheticScene::Stripes {
                period, normal_deg, ..
            } => {
                let (s, c) = normal_deg.to_radians().sin_cos();
                let x = (north * c + east * s).rem_euclid(period / 2.0);
                x.min(period / 2.0 - x)
            }
            SyntheticScene::Checker { size, .. } => {
                let dn = north.rem_euclid(size);
                let de = east.rem_euclid(size);
                dn.min(size - dn).min(de).min(size - de)
            }
            _ => f64::INFINITY,
        }
    }

    /// `(min, max)` of the pattern over a region (exact for the piecewise
    /// constant scenes, corner-based for gradients).
    pub fn value_range(&self, north: (f64, f64), east: (f64, f64)) -> (f64, f64) {
        match *self {
            SyntheticScene::Constant(v) => (v, v),
            SyntheticScene::Stripes { low, high, .. } | SyntheticScene::Checker { low, high, .. } => {
                (low.min(high), low.max(high))
            }
            SyntheticScene::Gradient { .. } => {
                let c = [
                    self.value(north.0, east.0),
                    self.value(north.0, east.1),
                    self.value(north.1, east.0),
                    self.value(north.1, east.1),
                ];
                (
                    c.iter().copied().fold(f64::INFINITY, f64::min),
                    c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
        }
    }
}

/// Smooth per-band multiplier in `[0.5, 1.5]`.
pub fn spectral_gain(band: usize, bands: usize) -> f64 {
    if bands <= 1 {
        return 1.0;
    }
    let x = band as f64 / (bands - 1) as f64;
    1.0 + 0.5 * (std::f64::consts::PI * (x - 0.5)).sin()
}
