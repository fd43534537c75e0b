use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// Pinhole camera. Camera space is right-handed with +z forward, +y down
/// and +x right; `world_to_camera` is a row-major 4×4 rigid transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub world_to_camera: [f64; 16],
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::Camera(format!(
                "focal lengths must be positive, got {} / {}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Camera(format!("zero-size image {}x{}", self.width, self.height)));
        }
        if self.world_to_camera.iter().any(|v| !v.is_finite()) {
            return Err(Error::Camera("non-finite extrinsics".into()));
        }
        let r = self.rotation();
        if (r.transpose() * r - Mat3::identity()).norm() > 1e-5 || r.determinant() < 0.0 {
            return Err(Error::Camera(
                "world_to_camera rotation block is not orthonormal".into(),
            ));
        }
        let m = &self.world_to_camera;
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::Camera("world_to_camera bottom row must be 0 0 0 1".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        let m = &self.world_to_camera;
        Mat3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10])
    }

    pub fn translation(&self) -> Vec3 {
        let m = &self.world_to_camera;
        Vec3::new(m[3], m[7], m[11])
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p + self.translation()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation().transpose() * self.translation())
    }

    pub fn from_extrinsics(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, r: &Mat3, t: &Vec3) -> Self {
        let mut m = [0.0; 16];
        for i in 0..3 {
            for j in 0..3 {
                m[i * 4 + j] = r[(i, j)];
            }
            m[i * 4 + 3] = t[i];
        }
        m[15] = 1.0;
        CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            world_to_camera: m,
        }
    }

    /// Camera at `eye` looking at `target`, with world `up` mapped to
    /// image-up (camera −y). Principal point at the image center.
    pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3, focal: f64, width: u32, height: u32) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(up).normalize();
        let down = forward.cross(&right);
        let r = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        Self::from_extrinsics(
            focal,
            focal,
            0.5 * width as f64,
            0.5 * height as f64,
            width,
            height,
            &r,
            &t,
        )
    }

    /// Orbit camera around `target`: azimuth about world +y (0 looks along
    /// −z from the +z side), elevation towards +y, both in radians.
    pub fn orbit(
        target: &Vec3,
        azimuth: f64,
        elevation: f64,
        distance: f64,
        focal: f64,
        width: u32,
        height: u32,
    ) -> Self {
        let dir = Vec3::new(
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
            elevation.cos() * azimuth.cos(),
        );
        let eye = target + distance * dir;
        Self::look_at(&eye, target, &Vec3::y(), focal, width, height)
    }

    pub fn with_resolution(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        CameraModel {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_puts_target_on_axis() {
        let cam = CameraModel::orbit(&Vec3::new(0.0, 0.1, 0.0), 0.4, 0.2, 0.6, 200.0, 64, 48);
        cam.validate().unwrap();
        let p = cam.to_camera(&Vec3::new(0.0, 0.1, 0.0));
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
        assert!((p.z - 0.6).abs() < 1e-12);
        assert!((cam.center() - cam.to_camera(&cam.center())).norm() > 0.0);
        assert!(cam.to_camera(&cam.center()).norm() < 1e-12);
        // World up projects upwards in the image.
        let above = cam.to_camera(&Vec3::new(0.0, 0.2, 0.0));
        assert!(above.y < 0.0);
    }

    #[test]
    fn invalid_cameras() {
        let mut cam = CameraModel::orbit(&Vec3::zeros(), 0.0, 0.0, 1.0, 100.0, 8, 8);
        cam.fx = 0.0;
        assert!(cam.validate().is_err());
        let mut cam = CameraModel::orbit(&Vec3::zeros(), 0.0, 0.0, 1.0, 100.0, 8, 8);
        cam.world_to_camera[0] = 2.0;
        assert!(cam.validate().is_err());
        let mut cam = CameraModel::orbit(&Vec3::zeros(), 0.0, 0.0, 1.0, 100.0, 8, 8);
        cam.width = 0;
        assert!(cam.validate().is_err());
    }
}
