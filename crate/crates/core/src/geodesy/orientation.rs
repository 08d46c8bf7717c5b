/// Unit quaternion rotating camera-frame vectors into NED.
///
/// Every constructor and operation returns a normalized quaternion with
/// `w >= 0`, so equal rotations serialize identically.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Orientation {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Below this `1 - |a·b|`, slerp falls back to normalized lerp.
const SLERP_LINEAR_THRESHOLD: f64 = 1e-8;

impl Default for Orientation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes an arbitrary non-zero quaternion.
    pub fn from_components(w: f64, x: f64, y: f64, z: f64) -> Self {
        Orientation { w, x, y, z }.normalized()
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        let k = s / len;
        Self::from_components(c, axis[0] * k, axis[1] * k, axis[2] * k)
    }

    /// Yaw about the down axis, radians.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], yaw)
    }

    /// Aerospace ZYX Euler angles in radians: yaw about down, then pitch,
    /// then roll, i.e. `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (roll / 2.0).sin_cos();
        let (sp, cp) = (pitch / 2.0).sin_cos();
        let (sy, cy) = (yaw / 2.0).sin_cos();
        Self::from_components(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        )
    }

    /// Inverse of [`from_euler_zyx`](Self::from_euler_zyx): (roll, pitch, yaw).
    pub fn to_euler_zyx(&self) -> (f64, f64, f64) {
        let Orientation { w, x, y, z } = *self;
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        (roll, pitch, yaw)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Orientation) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    fn normalized(self) -> Self {
        let n = self.norm();
        let s = if self.w < 0.0 { -1.0 / n } else { 1.0 / n };
        Orientation {
            w: self.w * s,
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }

    /// `self ∘ rhs`: applies `rhs` first, then `self`.
    pub fn compose(&self, rhs: &Orientation) -> Orientation {
        let (a, b) = (self, rhs);
        Orientation {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
        .normalized()
    }

    pub fn inverse(&self) -> Orientation {
        Orientation {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Orientation { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.to_matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Rotation angle between two orientations, radians in [0, π].
    pub fn angle_to(&self, other: &Orientation) -> f64 {
        2.0 * self.dot(other).abs().min(1.0).acos()
    }

    /// Spherical linear interpolation along the shortest arc, `t ∈ [0, 1]`.
    pub fn slerp(&self, other: &Orientation, t: f64) -> Orientation {
        if self == other {
            return *self;
        }
        let mut b = *other;
        let mut cos = self.dot(other);
        if cos < 0.0 {
            b = Orientation {
                w: -b.w,
                x: -b.x,
                y: -b.y,
                z: -b.z,
            };
            cos = -cos;
        }
        let (wa, wb) = if 1.0 - cos < SLERP_LINEAR_THRESHOLD {
            (1.0 - t, t)
        } else {
            let theta = cos.min(1.0).acos();
            let s = theta.sin();
            (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
        };
        Orientation {
            w: wa * self.w + wb * b.w,
            x: wa * self.x + wb * b.x,
            y: wa * self.y + wb * b.y,
            z: wa * self.z + wb * b.z,
        }
        .normalized()
    }
}
