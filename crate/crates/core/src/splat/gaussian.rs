//! Per-primitive geometry: 3D covariance, rotation composition and the
//! first-order perspective projection, with their reverse-mode derivatives.

use nalgebra::{Matrix2, Matrix2x3};

use super::camera::CameraModel;
use super::raster::RasterConfig;
use crate::error::{Error, Result};
use crate::math::{quat_mul_vjp, quat_normalize_vjp, quat_to_mat_vjp, Mat3, Quat, Vec3};

/// `Σ = R S Sᵀ Rᵀ` with `R` from the normalized `q` and `S = diag(s)`.
pub fn covariance_from(q: &Quat, s: &Vec3) -> Result<Mat3> {
    let q = q
        .try_normalize()
        .ok_or_else(|| Error::InvalidInput("zero quaternion".into()))?;
    let m = q.to_mat() * Mat3::from_diagonal(s);
    Ok(m * m.transpose())
}

/// Gradients of `Σ(q, s)` for unit `q`, given symmetric `d_cov`.
pub fn covariance_backward(q: &Quat, s: &Vec3, d_cov: &Mat3) -> (Quat, Vec3) {
    let r = q.to_mat();
    let m = r * Mat3::from_diagonal(s);
    let dm = 2.0 * d_cov * m;
    let dr = dm * Mat3::from_diagonal(s);
    let ds = Vec3::from_fn(|j, _| (0..3).map(|i| dm[(i, j)] * r[(i, j)]).sum());
    (quat_to_mat_vjp(q, &dr), ds)
}

/// World rotation `R = R′ R_bind` as a unit quaternion.
pub fn compose_rotation(local_q: &Quat, bind_q: &Quat) -> Quat {
    local_q.mul(bind_q).normalize()
}

pub fn compose_rotation_backward(local_q: &Quat, bind_q: &Quat, d: &Quat) -> (Quat, Quat) {
    let raw = local_q.mul(bind_q);
    let d_raw = quat_normalize_vjp(&raw, d);
    quat_mul_vjp(local_q, bind_q, &d_raw)
}

/// Screen-space footprint of a Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projected {
    pub mean2d: [f64; 2],
    /// Inverse 2D covariance `[a, b, c]` for the matrix `[[a, b], [b, c]]`.
    pub conic: [f64; 3],
    pub cov2d: [f64; 3],
    pub depth: f64,
    /// Half-width of the square support in pixels (3σ of the major axis).
    pub radius: f64,
}

fn jacobian(p: &Vec3, cam: &CameraModel) -> Matrix2x3<f64> {
    let iz = 1.0 / p.z;
    Matrix2x3::new(
        cam.fx * iz,
        0.0,
        -cam.fx * p.x * iz * iz,
        0.0,
        cam.fy * iz,
        -cam.fy * p.y * iz * iz,
    )
}

/// Projects a point to pixel coordinates; `None` in front of the near plane.
pub fn project_point(mean: &Vec3, cam: &CameraModel, near: f64) -> Option<([f64; 2], f64)> {
    let p = cam.to_camera(mean);
    if p.z <= near {
        return None;
    }
    Some(([cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy], p.z))
}

/// Gradient of [`project_point`] outputs (pixel position and depth) with
/// respect to the world-space mean.
pub fn project_point_backward(mean: &Vec3, cam: &CameraModel, d_uv: [f64; 2], d_depth: f64) -> Vec3 {
    let p = cam.to_camera(mean);
    let j = jacobian(&p, cam);
    let mut dp = j.transpose() * nalgebra::Vector2::new(d_uv[0], d_uv[1]);
    dp.z += d_depth;
    cam.rotation().transpose() * dp
}

pub fn project_gaussian(mean: &Vec3, cov: &Mat3, cam: &CameraModel, cfg: &RasterConfig) -> Option<Projected> {
    let p = cam.to_camera(mean);
    if p.z <= cfg.near {
        return None;
    }
    let m = jacobian(&p, cam) * cam.rotation();
    let c = m * cov * m.transpose();
    let (a, b, cc) = (c[(0, 0)] + cfg.cov_floor, c[(0, 1)], c[(1, 1)] + cfg.cov_floor);
    let det = a * cc - b * b;
    if !(det > 0.0) {
        return None;
    }
    let mid = 0.5 * (a + cc);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    Some(Projected {
        mean2d: [cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy],
        conic: [cc / det, -b / det, a / det],
        cov2d: [a, b, cc],
        depth: p.z,
        radius: cfg.radius_sigma * lambda_max.sqrt(),
    })
}

/// Reverse of [`project_gaussian`]: from gradients on the pixel mean and on
/// the conic entries (with `b` counted once) to gradients on the world mean
/// and the symmetric 3D covariance.
pub fn project_gaussian_backward(
    mean: &Vec3,
    cov: &Mat3,
    cam: &CameraModel,
    proj: &Projected,
    d_mean2d: [f64; 2],
    d_conic: [f64; 3],
) -> (Vec3, Mat3) {
    let p = cam.to_camera(mean);
    let w = cam.rotation();
    let j = jacobian(&p, cam);
    let m = j * w;

    let conic = Matrix2::new(proj.conic[0], proj.conic[1], proj.conic[1], proj.conic[2]);
    let g = Matrix2::new(d_conic[0], 0.5 * d_conic[1], 0.5 * d_conic[1], d_conic[2]);
    let d_cov2 = -(conic * g * conic);

    let d_cov3 = m.transpose() * d_cov2 * m;
    let d_m = 2.0 * d_cov2 * m * cov;
    let d_j = d_m * w.transpose();

    let (x, y, z) = (p.x, p.y, p.z);
    let (fx, fy) = (cam.fx, cam.fy);
    let iz = 1.0 / z;
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let mut dp = Vec3::new(
        fx * iz * d_mean2d[0],
        fy * iz * d_mean2d[1],
        -fx * x * iz2 * d_mean2d[0] - fy * y * iz2 * d_mean2d[1],
    );
    dp.x += d_j[(0, 2)] * (-fx * iz2);
    dp.y += d_j[(1, 2)] * (-fy * iz2);
    dp.z += d_j[(0, 0)] * (-fx * iz2)
        + d_j[(0, 2)] * (2.0 * fx * x * iz3)
        + d_j[(1, 1)] * (-fy * iz2)
        + d_j[(1, 2)] * (2.0 * fy * y * iz3);
    (w.transpose() * dp, d_cov3)
}
