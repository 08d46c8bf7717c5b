use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use swathcube::geodesy::{
    grid_convergence, wgs84_to_utm, GeodeticPoint, InsRecord, NedFrame, NedPoint, Orientation,
    ProjectedLog,
};
use swathcube::mesh::GroundModel;

/// Attitude jitter: independent Gaussian knots per axis, smoothed by a
/// first-order low-pass filter, scaled to a peak amplitude and linearly
/// interpolated between knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeNoise {
    /// Peak absolute roll, pitch and yaw, degrees.
    pub amplitude_deg: [f64; 3],
    pub knot_hz: f64,
    /// Low-pass coefficient in `(0, 1]`; 1 disables smoothing.
    pub smoothing: f64,
    pub seed: u64,
}

impl AttitudeNoise {
    /// The same peak on every axis.
    pub fn uniform(amplitude_deg: f64, seed: u64) -> Self {
        AttitudeNoise {
            amplitude_deg: [amplitude_deg; 3],
            knot_hz: 10.0,
            smoothing: 0.35,
            seed,
        }
    }
}

/// A lawnmower survey: parallel passes alternating north and south.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlan {
    /// Ground speed, m/s.
    pub speed: f64,
    /// Height above ground, m.
    pub agl: f64,
    /// Ground altitude above the ellipsoid, m.
    pub ground_altitude: f64,
    pub passes: usize,
    pub lines_per_pass: usize,
    /// Each pass is split into this many consecutive cubes.
    pub cubes_per_pass: usize,
    /// East offset between passes, m.
    pub pass_spacing: f64,
    /// Camera lines per second.
    pub line_rate: f64,
    /// Pose log records per second.
    pub ins_rate: f64,
    /// Time between the last line of a pass and the first of the next, s.
    pub turn_time: f64,
    /// Logging before the first and after the last line of each pass, s.
    pub lead_time: f64,
    pub noise: Option<AttitudeNoise>,
    /// Latitude/longitude of the plan origin (first pass start).
    pub origin: (f64, f64),
    pub start_time: f64,
}

impl Default for FlightPlan {
    fn default() -> Self {
        FlightPlan {
            speed: 10.0,
            agl: 40.0,
            ground_altitude: 95.0,
            passes: 1,
            lines_per_pass: 1000,
            cubes_per_pass: 1,
            pass_spacing: 25.0,
            line_rate: 249.0,
            ins_rate: 200.0,
            turn_time: 3.0,
            lead_time: 0.5,
            noise: None,
            origin: (35.1175, -89.9711),
            start_time: 1_000.0,
        }
    }
}

/// Line timing of one simulated cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeTiming {
    pub pass: usize,
    pub line_times: Vec<f64>,
}

/// A generated flight in a local frame whose origin is the plan origin at
/// ground altitude.
#[derive(Debug, Clone)]
pub struct SyntheticFlight {
    pub plan: FlightPlan,
    pub frame: NedFrame,
    pub times: Vec<f64>,
    pub positions: Vec<NedPoint>,
    pub orientations: Vec<Orientation>,
    pub cubes: Vec<CubeTiming>,
}

struct Segment {
    t0: f64,
    t1: f64,
    p0: [f64; 2],
    p1: [f64; 2],
    yaw0: f64,
    yaw1: f64,
}

impl SyntheticFlight {
    pub fn generate(plan: &FlightPlan) -> SyntheticFlight {
        assert!(plan.passes > 0 && plan.lines_per_pass > 1 && plan.cubes_per_pass > 0);
        let pass_time = (plan.lines_per_pass - 1) as f64 / plan.line_rate;
        let length = plan.speed * (pass_time + 2.0 * plan.lead_time);
        let mut segments = Vec::new();
        let mut cubes = Vec::new();
        let mut t = plan.start_time;
        for k in 0..plan.passes {
            let east = k as f64 * plan.pass_spacing;
            let northbound = k % 2 == 0;
            let (n0, n1) = if northbound { (0.0, length) } else { (length, 0.0) };
            let yaw = if northbound { 0.0 } else { std::f64::consts::PI };
            let t_end = t + pass_time + 2.0 * plan.lead_time;
            segments.push(Segment {
                t0: t,
                t1: t_end,
                p0: [n0, east],
                p1: [n1, east],
                yaw0: yaw,
                yaw1: yaw,
            });
            let first_line = t + plan.lead_time;
            let per_cube = plan.lines_per_pass.div_ceil(plan.cubes_per_pass);
            let mut line = 0;
            while line < plan.lines_per_pass {
                let n = per_cube.min(plan.lines_per_pass - line);
                cubes.push(CubeTiming {
                    pass: k,
                    line_times: (line..line + n)
                        .map(|i| first_line + i as f64 / plan.line_rate)
                        .collect(),
                });
                line += n;
            }
            if k + 1 < plan.passes {
                let next_east = (k + 1) as f64 * plan.pass_spacing;
                segments.push(Segment {
                    t0: t_end,
                    t1: t_end + plan.turn_time,
                    p0: [n1, east],
                    p1: [n1, next_east],
                    yaw0: yaw,
                    yaw1: if northbound { std::f64::consts::PI } else { 0.0 },
                });
            }
            t = t_end + plan.turn_time;
        }
        let t_last = segments.last().unwrap().t1;
        let n = ((t_last - plan.start_time) * plan.ins_rate).floor() as usize + 1;
        let times: Vec<f64> = (0..n)
            .map(|i| plan.start_time + i as f64 / plan.ins_rate)
            .collect();
        let noise = plan
            .noise
            .map(|cfg| NoiseTrack::new(&cfg, plan.start_time, t_last));
        let mut positions = Vec::with_capacity(n);
        let mut orientations = Vec::with_capacity(n);
        let mut seg = 0;
        for &t in &times {
            while seg + 1 < segments.len() && t > segments[seg].t1 {
                seg += 1;
            }
            let s = &segments[seg];
            let f = ((t - s.t0) / (s.t1 - s.t0)).clamp(0.0, 1.0);
            positions.push(NedPoint::new(
                s.p0[0] + (s.p1[0] - s.p0[0]) * f,
                s.p0[1] + (s.p1[1] - s.p0[1]) * f,
                -plan.agl,
            ));
            let yaw = s.yaw0 + (s.yaw1 - s.yaw0) * f;
            let [r, p, y] = noise.as_ref().map_or([0.0; 3], |nz| nz.at(t));
            orientations.push(Orientation::from_euler_zyx(r, p, yaw + y));
        }
        SyntheticFlight {
            plan: plan.clone(),
            frame: plan_frame(plan),
            times,
            positions,
            orientations,
            cubes,
        }
    }

    pub fn log(&self) -> ProjectedLog {
        ProjectedLog::from_ned(self.times.clone(), self.positions.clone(), self.orientations.clone())
            .expect("generated log is monotonic")
    }

    /// The ground plane, at `down = 0` in the flight frame.
    pub fn ground(&self) -> GroundModel {
        GroundModel::new(self.plan.ground_altitude, &self.frame)
    }

    /// Pose log records in geodetic coordinates with true-north attitudes,
    /// as an INS would report them.
    pub fn records(&self) -> Vec<InsRecord> {
        let to_true = self.frame.heading_offset().inverse();
        self.times
            .iter()
            .zip(&self.positions)
            .zip(&self.orientations)
            .map(|((&t, p), q)| {
                let position = self.frame.unproject(p).expect("flight stays inside the zone");
                let (roll, pitch, yaw) = to_true.compose(q).to_euler_zyx();
                InsRecord {
                    timestamp: t,
                    position,
                    roll: roll.to_degrees(),
                    pitch: pitch.to_degrees(),
                    yaw: yaw.to_degrees(),
                }
            })
            .collect()
    }

    /// Total capture time over all lines of all cubes, s.
    pub fn capture_duration(&self) -> f64 {
        self.cubes.iter().map(|c| c.line_times.len() as f64).sum::<f64>() / self.plan.line_rate
    }
}

/// The flight frame: origin at the plan origin on the ground plane.
pub fn plan_frame(plan: &FlightPlan) -> NedFrame {
    let origin = GeodeticPoint::new(plan.origin.0, plan.origin.1, plan.ground_altitude)
        .expect("valid plan origin");
    let u = wgs84_to_utm(&origin, None).expect("origin inside the UTM domain");
    NedFrame {
        zone: u.zone,
        hemisphere: u.hemisphere,
        origin_easting: u.easting,
        origin_northing: u.northing,
        origin_altitude: plan.ground_altitude,
        convergence_deg: grid_convergence(&origin, u.zone).expect("zone of the origin"),
    }
}

struct NoiseTrack {
    t0: f64,
    dt: f64,
    knots: Vec<[f64; 3]>,
}

impl NoiseTrack {
    fn new(cfg: &AttitudeNoise, t0: f64, t1: f64) -> Self {
        let dt = 1.0 / cfg.knot_hz;
        let n = ((t1 - t0) / dt).ceil() as usize + 2;
        let mut rng = StdRng::seed_from_u64(cfg.seed);
        let mut state = [0.0; 3];
        let mut knots = Vec::with_capacity(n);
        for _ in 0..n {
            for s in &mut state {
                let x: f64 = StandardNormal.sample(&mut rng);
                *s += cfg.smoothing * (x - *s);
            }
            knots.push(state);
        }
        for axis in 0..3 {
            let peak = knots.iter().map(|k| k[axis].abs()).fold(0.0, f64::max);
            let scale = if peak > 0.0 {
                cfg.amplitude_deg[axis].to_radians() / peak
            } else {
                0.0
            };
            for k in &mut knots {
                k[axis] *= scale;
            }
        }
        NoiseTrack { t0, dt, knots }
    }

    fn at(&self, t: f64) -> [f64; 3] {
        let x = ((t - self.t0) / self.dt).max(0.0);
        let i = (x.floor() as usize).min(self.knots.len() - 2);
        let f = x - i as f64;
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * f)
    }
}
