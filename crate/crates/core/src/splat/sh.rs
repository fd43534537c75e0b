//! Real spherical harmonics up to degree 3.
//!
//! Basis ordering is band-major, `m = -l..=l` within a band, with no
//! Condon-Shortley phase: band 1 is proportional to `(y, z, x)`.

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

pub const MAX_SH_DEGREE: usize = 3;
pub const MAX_SH_COEFFS: usize = 16;
/// Added to the evaluated color so that all-zero coefficients render mid-gray.
pub const SH_DC_OFFSET: f64 = 0.5;
pub const SH_C0: f64 = 0.28209479177387814;

const C1: f64 = 0.4886025119029199;
const C2: [f64; 3] = [1.0925484305920792, 0.31539156525252005, 0.5462742152960396];
const C3: [f64; 5] = [
    0.5900435899266435,
    2.890611442640554,
    0.4570457994644658,
    0.3731763325901154,
    1.445305721320277,
];

/// Per-primitive coefficients, one RGB triple per basis function.
pub type ShCoeffs = [[f64; 3]; MAX_SH_COEFFS];

pub fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Basis values at `d`; entries beyond the degree are zero. `d` is assumed
/// unit length (the polynomials are evaluated as written).
pub fn sh_basis(degree: usize, d: &Vec3) -> [f64; MAX_SH_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    let mut b = [0.0; MAX_SH_COEFFS];
    b[0] = SH_C0;
    if degree >= 1 {
        b[1] = C1 * y;
        b[2] = C1 * z;
        b[3] = C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = C2[0] * x * y;
        b[5] = C2[0] * y * z;
        b[6] = C2[1] * (2.0 * zz - xx - yy);
        b[7] = C2[0] * x * z;
        b[8] = C2[2] * (xx - yy);
        if degree >= 3 {
            b[9] = C3[0] * y * (3.0 * xx - yy);
            b[10] = C3[1] * x * y * z;
            b[11] = C3[2] * y * (4.0 * zz - xx - yy);
            b[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
            b[13] = C3[2] * x * (4.0 * zz - xx - yy);
            b[14] = C3[4] * z * (xx - yy);
            b[15] = C3[0] * x * (xx - 3.0 * yy);
        }
    }
    b
}

/// Partial derivatives of each basis polynomial with respect to `(x, y, z)`.
pub fn sh_basis_jacobian(degree: usize, d: &Vec3) -> [[f64; 3]; MAX_SH_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    let mut j = [[0.0; 3]; MAX_SH_COEFFS];
    if degree >= 1 {
        j[1] = [0.0, C1, 0.0];
        j[2] = [0.0, 0.0, C1];
        j[3] = [C1, 0.0, 0.0];
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        j[4] = [C2[0] * y, C2[0] * x, 0.0];
        j[5] = [0.0, C2[0] * z, C2[0] * y];
        j[6] = [-2.0 * C2[1] * x, -2.0 * C2[1] * y, 4.0 * C2[1] * z];
        j[7] = [C2[0] * z, 0.0, C2[0] * x];
        j[8] = [2.0 * C2[2] * x, -2.0 * C2[2] * y, 0.0];
        if degree >= 3 {
            j[9] = [6.0 * C3[0] * x * y, C3[0] * (3.0 * xx - 3.0 * yy), 0.0];
            j[10] = [C3[1] * y * z, C3[1] * x * z, C3[1] * x * y];
            j[11] = [
                -2.0 * C3[2] * x * y,
                C3[2] * (4.0 * zz - xx - 3.0 * yy),
                8.0 * C3[2] * y * z,
            ];
            j[12] = [
                -6.0 * C3[3] * x * z,
                -6.0 * C3[3] * y * z,
                C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
            ];
            j[13] = [
                C3[2] * (4.0 * zz - 3.0 * xx - yy),
                -2.0 * C3[2] * x * y,
                8.0 * C3[2] * x * z,
            ];
            j[14] = [2.0 * C3[4] * x * z, -2.0 * C3[4] * y * z, C3[4] * (xx - yy)];
            j[15] = [C3[0] * (3.0 * xx - 3.0 * yy), -6.0 * C3[0] * x * y, 0.0];
        }
    }
    j
}

/// Color before clamping: `0.5 + Σ c_k Y_k(d)` per channel.
pub fn sh_eval_raw(coeffs: &ShCoeffs, degree: usize, d: &Vec3) -> [f64; 3] {
    let b = sh_basis(degree, d);
    let mut out = [SH_DC_OFFSET; 3];
    for k in 0..num_coeffs(degree) {
        for c in 0..3 {
            out[c] += coeffs[k][c] * b[k];
        }
    }
    out
}

/// Evaluates the color for unit direction `d`, clamped to `[0, 1]`.
pub fn sh_eval(coeffs: &ShCoeffs, degree: usize, d: &Vec3) -> [f64; 3] {
    sh_eval_raw(coeffs, degree, d).map(|v| v.clamp(0.0, 1.0))
}

/// Backward of [`sh_eval`]: accumulates coefficient gradients into
/// `d_coeffs` and returns the gradient with respect to `d`.
pub fn sh_eval_backward(
    coeffs: &ShCoeffs,
    degree: usize,
    d: &Vec3,
    d_color: &[f64; 3],
    d_coeffs: &mut ShCoeffs,
) -> Vec3 {
    let raw = sh_eval_raw(coeffs, degree, d);
    let g: [f64; 3] = std::array::from_fn(|c| if raw[c] < 0.0 || raw[c] > 1.0 { 0.0 } else { d_color[c] });
    if g == [0.0; 3] {
        return Vec3::zeros();
    }
    let b = sh_basis(degree, d);
    let jac = sh_basis_jacobian(degree, d);
    let mut dd = Vec3::zeros();
    for k in 0..num_coeffs(degree) {
        let mut s = 0.0;
        for c in 0..3 {
            d_coeffs[k][c] += b[k] * g[c];
            s += coeffs[k][c] * g[c];
        }
        if k > 0 {
            dd += s * Vec3::new(jac[k][0], jac[k][1], jac[k][2]);
        }
    }
    dd
}

/// Square band matrices indexed by centered `(m, n)`.
struct Band {
    l: i32,
    m: Vec<f64>,
}

impl Band {
    fn zeros(l: i32) -> Band {
        let n = (2 * l + 1) as usize;
        Band { l, m: vec![0.0; n * n] }
    }

    fn at(&self, i: i32, j: i32) -> f64 {
        let n = 2 * self.l + 1;
        self.m[((i + self.l) * n + (j + self.l)) as usize]
    }

    fn set(&mut self, i: i32, j: i32, v: f64) {
        let n = 2 * self.l + 1;
        self.m[((i + self.l) * n + (j + self.l)) as usize] = v;
    }
}

fn p(i: i32, a: i32, b: i32, l: i32, r1: &Band, prev: &Band) -> f64 {
    if b == l {
        r1.at(i, 1) * prev.at(a, l - 1) - r1.at(i, -1) * prev.at(a, -l + 1)
    } else if b == -l {
        r1.at(i, 1) * prev.at(a, -l + 1) + r1.at(i, -1) * prev.at(a, l - 1)
    } else {
        r1.at(i, 0) * prev.at(a, b)
    }
}

fn band_rotation(l: i32, r1: &Band, prev: &Band) -> Band {
    let mut out = Band::zeros(l);
    for m in -l..=l {
        for n in -l..=l {
            let delta = if m == 0 { 1.0 } else { 0.0 };
            let denom = if n.abs() == l {
                (2 * l * (2 * l - 1)) as f64
            } else {
                ((l + n) * (l - n)) as f64
            };
            let am = m.abs();
            let u = (((l + m) * (l - m)) as f64 / denom).sqrt();
            let v = 0.5 * ((1.0 + delta) * ((l + am - 1) * (l + am)) as f64 / denom).sqrt() * (1.0 - 2.0 * delta);
            let w = -0.5 * (((l - am - 1) * (l - am)) as f64 / denom).max(0.0).sqrt() * (1.0 - delta);

            let mut val = 0.0;
            if u != 0.0 {
                val += u * p(0, m, n, l, r1, prev);
            }
            if v != 0.0 {
                let vv = if m == 0 {
                    p(1, 1, n, l, r1, prev) + p(-1, -1, n, l, r1, prev)
                } else if m > 0 {
                    let d1: f64 = if m == 1 { 1.0 } else { 0.0 };
                    p(1, m - 1, n, l, r1, prev) * (1.0 + d1).sqrt() - p(-1, -m + 1, n, l, r1, prev) * (1.0 - d1)
                } else {
                    let d1: f64 = if m == -1 { 1.0 } else { 0.0 };
                    p(1, m + 1, n, l, r1, prev) * (1.0 - d1) + p(-1, -m - 1, n, l, r1, prev) * (1.0 + d1).sqrt()
                };
                val += v * vv;
            }
            if w != 0.0 {
                let ww = if m > 0 {
                    p(1, m + 1, n, l, r1, prev) + p(-1, -m - 1, n, l, r1, prev)
                } else {
                    p(1, m - 1, n, l, r1, prev) - p(-1, -m + 1, n, l, r1, prev)
                };
                val += w * ww;
            }
            out.set(m, n, val);
        }
    }
    out
}

/// Rotates coefficients so that evaluating the result at `d` equals
/// evaluating the input at `R⁻¹ d`.
pub fn sh_rotate(coeffs: &ShCoeffs, degree: usize, rot: &Mat3) -> Result<ShCoeffs> {
    if degree > MAX_SH_DEGREE {
        return Err(Error::InvalidInput(format!(
            "SH degree {degree} exceeds {MAX_SH_DEGREE}"
        )));
    }
    if (rot.transpose() * rot - Mat3::identity()).norm() > 1e-4 || rot.determinant() < 0.0 {
        return Err(Error::InvalidInput("SH rotation matrix is not a rotation".into()));
    }
    let mut out = [[0.0; 3]; MAX_SH_COEFFS];
    out[0] = coeffs[0];
    if degree == 0 {
        return Ok(out);
    }
    // Band 1 in (y, z, x) order.
    let perm = [1usize, 2, 0];
    let mut r1 = Band::zeros(1);
    for i in -1..=1 {
        for j in -1..=1 {
            r1.set(i, j, rot[(perm[(i + 1) as usize], perm[(j + 1) as usize])]);
        }
    }
    let mut band = Band { l: 1, m: r1.m.clone() };
    for l in 1..=degree as i32 {
        if l > 1 {
            band = band_rotation(l, &r1, &band);
        }
        let base = (l * l) as usize;
        for m in -l..=l {
            let mut acc = [0.0; 3];
            for n in -l..=l {
                let d = band.at(m, n);
                let c = coeffs[base + (n + l) as usize];
                for ch in 0..3 {
                    acc[ch] += d * c[ch];
                }
            }
            out[base + (m + l) as usize] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dir(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n < 1.0 {
                return v / n;
            }
        }
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, degree: usize) -> ShCoeffs {
        let mut c = [[0.0; 3]; MAX_SH_COEFFS];
        for k in 0..num_coeffs(degree) {
            c[k] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        }
        c
    }

    fn dot_basis(c: &ShCoeffs, degree: usize, d: &Vec3) -> [f64; 3] {
        let b = sh_basis(degree, d);
        std::array::from_fn(|ch| (0..num_coeffs(degree)).map(|k| c[k][ch] * b[k]).sum())
    }

    #[test]
    fn dc_term() {
        let mut c = [[0.0; 3]; MAX_SH_COEFFS];
        c[0] = [0.3, -0.2, 0.1];
        let col = sh_eval(&c, 0, &Vec3::new(0.0, 0.6, 0.8));
        for ch in 0..3 {
            assert!((col[ch] - (0.5 + c[0][ch] / (2.0 * std::f64::consts::PI.sqrt()))).abs() < 1e-15);
        }
        assert_eq!(sh_eval(&[[0.0; 3]; 16], 3, &Vec3::z()), [0.5; 3]);
    }

    #[test]
    fn band_one_is_odd() {
        let mut c = [[0.0; 3]; MAX_SH_COEFFS];
        c[2] = [0.2, 0.1, -0.1];
        let up = sh_eval_raw(&c, 1, &Vec3::z());
        let down = sh_eval_raw(&c, 1, &-Vec3::z());
        for ch in 0..3 {
            assert!((up[ch] - down[ch] - 2.0 * c[2][ch] * C1).abs() < 1e-15);
        }
    }

    #[test]
    fn basis_is_orthonormal_on_sphere() {
        // Fibonacci-sphere quadrature of ∫ Y_i Y_j dΩ.
        let n = 20_000;
        let mut gram = [[0.0; 16]; 16];
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = i as f64 * std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let b = sh_basis(3, &Vec3::new(r * phi.cos(), r * phi.sin(), z));
            for a in 0..16 {
                for c in 0..16 {
                    gram[a][c] += b[a] * b[c] * 4.0 * std::f64::consts::PI / n as f64;
                }
            }
        }
        for a in 0..16 {
            for c in 0..16 {
                let want = if a == c { 1.0 } else { 0.0 };
                assert!((gram[a][c] - want).abs() < 1e-3, "{a},{c}: {}", gram[a][c]);
            }
        }
    }

    #[test]
    fn jacobian_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Vec3::new(0.3, -0.5, 0.7);
        let j = sh_basis_jacobian(3, &d);
        let h = 1e-6;
        for axis in 0..3 {
            let mut p = d;
            let mut m = d;
            p[axis] += h;
            m[axis] -= h;
            let (bp, bm) = (sh_basis(3, &p), sh_basis(3, &m));
            for k in 0..16 {
                assert!(((bp[k] - bm[k]) / (2.0 * h) - j[k][axis]).abs() < 1e-7);
            }
        }
        let _ = random_dir(&mut rng);
    }

    #[test]
    fn rotate_then_eval_matches_eval_of_inverse_rotated_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for degree in 0..=3 {
            for _ in 0..25 {
                let q = Quat(std::array::from_fn(|_| rng.random_range(-1.0..1.0))).normalize();
                let r = q.to_mat();
                let c = random_coeffs(&mut rng, degree);
                let rc = sh_rotate(&c, degree, &r).unwrap();
                for _ in 0..100 {
                    let d = random_dir(&mut rng);
                    let lhs = dot_basis(&rc, degree, &d);
                    let rhs = dot_basis(&c, degree, &(r.transpose() * d));
                    for ch in 0..3 {
                        assert!((lhs[ch] - rhs[ch]).abs() < 1e-6, "deg {degree}: {lhs:?} {rhs:?}");
                    }
                }
                assert_eq!(rc[0], c[0]);
                let norm = |c: &ShCoeffs| c.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm(&rc) - norm(&c)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_rotation_is_noop_and_reflection_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_coeffs(&mut rng, 3);
        let rc = sh_rotate(&c, 3, &Mat3::identity()).unwrap();
        for k in 0..16 {
            for ch in 0..3 {
                assert!((rc[k][ch] - c[k][ch]).abs() < 1e-14);
            }
        }
        assert!(sh_rotate(&c, 3, &(2.0 * Mat3::identity())).is_err());
        assert!(sh_rotate(&c, 3, &Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_err());
    }

    #[test]
    fn eval_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = random_coeffs(&mut rng, 3);
        for k in 0..16 {
            for ch in 0..3 {
                c[k][ch] *= 0.2;
            }
        }
        let d = Vec3::new(0.2, 0.4, -0.6);
        let g = [0.7, -0.3, 0.2];
        let f = |c: &ShCoeffs, d: &Vec3| -> f64 {
            let col = sh_eval(c, 3, d);
            (0..3).map(|i| col[i] * g[i]).sum()
        };
        let mut dc = [[0.0; 3]; 16];
        let dd = sh_eval_backward(&c, 3, &d, &g, &mut dc);
        let h = 1e-6;
        for axis in 0..3 {
            let mut p = d;
            let mut m = d;
            p[axis] += h;
            m[axis] -= h;
            assert!(((f(&c, &p) - f(&c, &m)) / (2.0 * h) - dd[axis]).abs() < 1e-6);
        }
        for k in [0, 5, 15] {
            let mut p = c;
            let mut m = c;
            p[k][1] += h;
            m[k][1] -= h;
            assert!(((f(&p, &d) - f(&m, &d)) / (2.0 * h) - dc[k][1]).abs() < 1e-6);
        }
    }
}
