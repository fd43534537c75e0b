//! Small fixed-size geometry helpers shared by the deformation and splatting
//! code, together with their vector-Jacobian products.
//!
//! Quaternions are stored as `[w, x, y, z]` (Hamilton convention). All `*_vjp`
//! functions take the upstream gradient of the output and return the gradient
//! of the inputs.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat(pub [f64; 4]);

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat([1.0, 0.0, 0.0, 0.0]);
    pub const ZERO: Quat = Quat([0.0; 4]);

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat([w, x, y, z])
    }

    pub fn w(&self) -> f64 {
        self.0[0]
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Quat {
        Quat(self.0.map(|v| v * s))
    }

    pub fn add(&self, other: &Quat) -> Quat {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0.iter()) {
            *o += b;
        }
        Quat(out)
    }

    pub fn add_scaled(&mut self, other: &Quat, s: f64) {
        for (o, b) in self.0.iter_mut().zip(other.0.iter()) {
            *o += s * b;
        }
    }

    /// Returns `None` for a (numerically) zero quaternion.
    pub fn try_normalize(&self) -> Option<Quat> {
        let n = self.norm();
        if n > 1e-300 && n.is_finite() {
            Some(self.scale(1.0 / n))
        } else {
            None
        }
    }

    pub fn normalize(&self) -> Quat {
        self.try_normalize().unwrap_or(Quat::IDENTITY)
    }

    pub fn conj(&self) -> Quat {
        let [w, x, y, z] = self.0;
        Quat([w, -x, -y, -z])
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Quat) -> Quat {
        let [aw, ax, ay, az] = self.0;
        let [bw, bx, by, bz] = rhs.0;
        Quat([
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ])
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_mat(&self) -> Mat3 {
        let [w, x, y, z] = self.0;
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.to_mat() * v
    }

    /// Exponential map of an axis-angle vector (radians).
    pub fn from_axis_angle(aa: &[f64; 3]) -> Quat {
        let phi = (aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]).sqrt();
        let s = half_sinc(phi);
        Quat([(0.5 * phi).cos(), s * aa[0], s * aa[1], s * aa[2]])
    }

    /// Logarithm map to an axis-angle vector with angle in `[0, π]`.
    pub fn to_axis_angle(&self) -> [f64; 3] {
        let q = if self.0[0] < 0.0 { self.scale(-1.0) } else { *self };
        let [w, x, y, z] = q.0;
        let vn = (x * x + y * y + z * z).sqrt();
        if vn < 1e-12 {
            return [2.0 * x, 2.0 * y, 2.0 * z];
        }
        let angle = 2.0 * vn.atan2(w);
        let k = angle / vn;
        [k * x, k * y, k * z]
    }

    /// Rotation quaternion from an orthonormal matrix.
    pub fn from_mat(m: &Mat3) -> Quat {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat([
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            ])
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Quat([
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            ])
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Quat([
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            ])
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Quat([
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            ])
        };
        q.normalize()
    }

    /// Geodesic angle between the rotations represented by two unit quaternions.
    pub fn angle_to(&self, other: &Quat) -> f64 {
        let rel = self.conj().mul(other);
        let [w, x, y, z] = rel.0;
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
    }
}

/// `sin(φ/2)/φ`, stable near zero.
fn half_sinc(phi: f64) -> f64 {
    if phi < 1e-4 {
        0.5 - phi * phi / 48.0
    } else {
        (0.5 * phi).sin() / phi
    }
}

/// Gradients of `a ⊗ b` with respect to `a` and `b`.
pub fn quat_mul_vjp(a: &Quat, b: &Quat, d: &Quat) -> (Quat, Quat) {
    let [aw, ax, ay, az] = a.0;
    let [bw, bx, by, bz] = b.0;
    let [dw, dx, dy, dz] = d.0;
    let da = Quat([
        dw * bw + dx * bx + dy * by + dz * bz,
        -dw * bx + dx * bw - dy * bz + dz * by,
        -dw * by + dx * bz + dy * bw - dz * bx,
        -dw * bz - dx * by + dy * bx + dz * bw,
    ]);
    let db = Quat([
        dw * aw + dx * ax + dy * ay + dz * az,
        -dw * ax + dx * aw + dy * az - dz * ay,
        -dw * ay - dx * az + dy * aw + dz * ax,
        -dw * az + dx * ay - dy * ax + dz * aw,
    ]);
    (da, db)
}

/// Gradient of [`Quat::to_mat`] (the polynomial form) with respect to `q`.
pub fn quat_to_mat_vjp(q: &Quat, g: &Mat3) -> Quat {
    let [w, x, y, z] = q.0;
    let g = |r: usize, c: usize| g[(r, c)];
    Quat([
        2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1)),
        2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) + w * g(2, 1)
            - 2.0 * x * g(2, 2)),
        2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) + z * g(2, 1)
            - 2.0 * y * g(2, 2)),
        2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1)
            + y * g(1, 2)
            + x * g(2, 0)
            + y * g(2, 1)),
    ])
}

/// Gradient of `q / |q|` with respect to the unnormalized `q`.
pub fn quat_normalize_vjp(q: &Quat, d: &Quat) -> Quat {
    let n = q.norm();
    if n <= 1e-300 {
        return Quat::ZERO;
    }
    let u = q.scale(1.0 / n);
    let proj = u.dot(d);
    Quat(std::array::from_fn(|i| (d.0[i] - u.0[i] * proj) / n))
}

/// Gradient of `v / |v|` with respect to `v`.
pub fn vec_normalize_vjp(v: &Vec3, d: &Vec3) -> Vec3 {
    let n = v.norm();
    if n <= 1e-300 {
        return Vec3::zeros();
    }
    let u = v / n;
    (d - u * u.dot(d)) / n
}

/// Gradient of [`Quat::from_axis_angle`] with respect to the axis-angle vector.
pub fn axis_angle_vjp(aa: &[f64; 3], d: &Quat) -> [f64; 3] {
    let phi = (aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]).sqrt();
    let s = half_sinc(phi);
    // (ds/dφ) / φ
    let ds_over_phi = if phi < 1e-3 {
        -1.0 / 24.0 + phi * phi / 960.0
    } else {
        (0.5 * phi * (0.5 * phi).cos() - (0.5 * phi).sin()) / (phi * phi * phi)
    };
    let dv = [d.0[1], d.0[2], d.0[3]];
    let a_dot_dv = aa[0] * dv[0] + aa[1] * dv[1] + aa[2] * dv[2];
    std::array::from_fn(|i| -0.5 * s * d.0[0] * aa[i] + s * dv[i] + aa[i] * a_dot_dv * ds_over_phi)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`], with the argument clamped away from 0 and 1.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}
