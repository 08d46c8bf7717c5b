pub const STRETCH_LOW_PERCENT: f64 = 2.0;
pub const STRETCH_HIGH_PERCENT: f64 = 98.0;
pub const HISTOGRAM_BINS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StretchMode {
    /// `[0, full scale]` of the data type.
    None,
    /// One pair of bounds pooled over all displayed channels.
    #[default]
    Common,
    PerChannel,
}

impl std::str::FromStr for StretchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(StretchMode::None),
            "common" => Ok(StretchMode::Common),
            "per-channel" | "per_channel" | "perchannel" => Ok(StretchMode::PerChannel),
            other => Err(format!("unknown stretch mode {other:?} (none, common, per-channel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StretchMethod {
    /// Sort-based nearest rank over every value.
    Exact,
    /// Nearest rank over a fixed-bin histogram.
    #[default]
    Histogram,
}

/// Display black and white points per channel.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StretchBounds {
    pub mode: StretchMode,
    /// `(low, high)` per channel, `low <= high`.
    pub channels: Vec<(f32, f32)>,
}

impl StretchBounds {
    pub fn full_scale(channels: usize, full_scale: f32) -> Self {
        StretchBounds {
            mode: StretchMode::None,
            channels: vec![(0.0, full_scale); channels],
        }
    }

    /// Maps a value to 0..=255. Equal bounds give mid-gray.
    #[inline]
    pub fn to_u8(&self, channel: usize, v: f32) -> u8 {
        let (low, high) = self.channels[channel];
        apply_stretch(v, low, high)
    }
}

#[inline]
pub fn apply_stretch(v: f32, low: f32, high: f32) -> u8 {
    if !(high > low) {
        return 128;
    }
    if v.is_nan() {
        return 0;
    }
    let t = ((v - low) / (high - low)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Nearest-rank percentile: the value at 1-based rank `⌈p/100 · n⌉`.
/// Sorts `values` in place. NaNs must be filtered out beforehand.
pub fn percentile_exact(values: &mut [f32], percent: f64) -> Option<f32> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f32::total_cmp);
    Some(values[nearest_rank(values.len() as u64, percent) as usize - 1])
}

fn nearest_rank(n: u64, percent: f64) -> u64 {
    ((percent / 100.0 * n as f64).ceil() as u64).clamp(1, n)
}

/// Fixed-range histogram used for screen-content stretch.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f32,
    pub max: f32,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// Histogram over `[min, max]` of the finite values in `values`.
    pub fn of<'a>(sets: impl IntoIterator<Item = &'a [f32]> + Clone, bins: usize) -> Option<Self> {
        let (mut min, mut max) = (f32::INFINITY, f32::NEG_INFINITY);
        for s in sets.clone() {
            for &v in s.iter().filter(|v| v.is_finite()) {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if min > max {
            return None;
        }
        let mut h = Histogram {
            min,
            max,
            counts: vec![0; bins],
            total: 0,
        };
        for s in sets {
            for &v in s.iter().filter(|v| v.is_finite()) {
                let b = h.bin_of(v);
                h.counts[b] += 1;
                h.total += 1;
            }
        }
        Some(h)
    }

    fn width(&self) -> f64 {
        (self.max as f64 - self.min as f64) / self.counts.len() as f64
    }

    fn bin_of(&self, v: f32) -> usize {
        if self.max <= self.min {
            return 0;
        }
        let t = (v as f64 - self.min as f64) / self.width();
        (t as usize).min(self.counts.len() - 1)
    }

    /// Lower and upper edge of bin `i`.
    pub fn edges(&self, i: usize) -> (f32, f32) {
        if self.max <= self.min {
            return (self.min, self.max);
        }
        let w = self.width();
        let lo = self.min as f64 + w * i as f64;
        let hi = if i + 1 == self.counts.len() {
            self.max as f64
        } else {
            self.min as f64 + w * (i + 1) as f64
        };
        (lo as f32, hi as f32)
    }

    /// Bin holding the value of nearest rank `⌈p/100 · total⌉`.
    pub fn rank_bin(&self, percent: f64) -> usize {
        let rank = nearest_rank(self.total.max(1), percent);
        let mut seen = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            seen += c;
            if seen >= rank {
                return i;
            }
        }
        self.counts.len() - 1
    }

    /// Low bound at the lower edge of its bin, high at the upper edge of its.
    pub fn bounds(&self) -> (f32, f32) {
        let lo = self.edges(self.rank_bin(STRETCH_LOW_PERCENT)).0;
        let hi = self.edges(self.rank_bin(STRETCH_HIGH_PERCENT)).1;
        (lo, hi)
    }
}

fn bounds_of(sets: &[&[f32]], method: StretchMethod) -> Option<(f32, f32)> {
    match method {
        StretchMethod::Exact => {
            let mut all: Vec<f32> = sets
                .iter()
                .flat_map(|s| s.iter().copied())
                .filter(|v| v.is_finite())
                .collect();
            let lo = percentile_exact(&mut all, STRETCH_LOW_PERCENT)?;
            // already sorted
            let hi = all[nearest_rank(all.len() as u64, STRETCH_HIGH_PERCENT) as usize - 1];
            Some((lo, hi))
        }
        StretchMethod::Histogram => Histogram::of(sets.iter().copied(), HISTOGRAM_BINS).map(|h| h.bounds()),
    }
}

/// 2nd / 98th percentile bounds of each displayed channel. Non-finite
/// values (uncovered pixels) are skipped. `full_scale` is used in
/// [`StretchMode::None`] and for channels with no values at all.
pub fn stretch_bounds(
    channels: &[&[f32]],
    mode: StretchMode,
    method: StretchMethod,
    full_scale: f32,
) -> StretchBounds {
    let fallback = (0.0, full_scale);
    let bounds = match mode {
        StretchMode::None => vec![fallback; channels.len()],
        StretchMode::Common => {
            vec![bounds_of(channels, method).unwrap_or(fallback); channels.len()]
        }
        StretchMode::PerChannel => channels
            .iter()
            .map(|c| bounds_of(&[c], method).unwrap_or(fallback))
            .collect(),
    };
    StretchBounds {
        mode,
        channels: bounds,
    }
}

/// Index of the wavelength closest to `target`; ties go to the lower index.
pub fn nearest_band(wavelengths: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, w) in wavelengths.iter().enumerate() {
        if (w - target).abs() < (wavelengths[best] - target).abs() {
            best = i;
        }
    }
    best
}
