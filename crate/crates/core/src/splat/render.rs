//! Scene-level rendering of deformed samples as point discs or as bound
//! Gaussians, and the chain back to sample positions and rotations.

use rayon::prelude::*;

use super::camera::CameraModel;
use super::gaussian::{
    compose_rotation, compose_rotation_backward, covariance_backward, project_gaussian, project_gaussian_backward,
    project_point, project_point_backward, Projected,
};
use super::raster::{rasterize, rasterize_backward, Kernel, Raster, RasterConfig, Splat};
use super::sh::{sh_eval, sh_eval_backward, ShCoeffs, MAX_SH_DEGREE};
use crate::error::{Error, Result};
use crate::math::{quat_to_mat_vjp, vec_normalize_vjp, Mat3, Quat, Vec3};
use crate::psm::{DeformedSample, PsmCloud, SurfaceSample};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrimitive {
    /// Binding (face, barycentrics, offset), opacity and the point color it
    /// was initialized from.
    pub base: SurfaceSample,
    pub local_q: Quat,
    pub log_scale: [f64; 3],
    pub sh: ShCoeffs,
}

impl GaussianPrimitive {
    pub fn scale(&self) -> Vec3 {
        Vec3::new(
            self.log_scale[0].exp(),
            self.log_scale[1].exp(),
            self.log_scale[2].exp(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSet {
    pub prims: Vec<GaussianPrimitive>,
    pub sh_degree: usize,
}

impl GaussianSet {
    pub fn len(&self) -> usize {
        self.prims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prims.is_empty()
    }

    pub fn samples(&self) -> Vec<SurfaceSample> {
        self.prims.iter().map(|g| g.base).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > MAX_SH_DEGREE {
            return Err(Error::InvalidInput(format!(
                "SH degree {} exceeds {MAX_SH_DEGREE}",
                self.sh_degree
            )));
        }
        Ok(())
    }
}

/// Composited image plus per-primitive statistics.
#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    /// Row-major linear RGB.
    pub image: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
    /// Maximum compositing weight `ω` each primitive reached in this view.
    pub per_primitive_max_weight: Vec<f64>,
    splats: Vec<Option<Splat>>,
    raster: Raster,
    cfg: RasterConfig,
}

impl RenderOutput {
    fn new(splats: Vec<Option<Splat>>, cam: &CameraModel, background: [f64; 3], cfg: &RasterConfig) -> Result<Self> {
        let raster = rasterize(&splats, cam.width, cam.height, background, cfg)?;
        Ok(RenderOutput {
            width: cam.width,
            height: cam.height,
            image: raster.image.clone(),
            alpha: raster.alpha.clone(),
            per_primitive_max_weight: raster.max_weight.clone(),
            splats,
            raster,
            cfg: *cfg,
        })
    }

    pub fn splats(&self) -> &[Option<Splat>] {
        &self.splats
    }
}

fn check_aligned(n: usize, deformed: &[DeformedSample]) -> Result<()> {
    if n != deformed.len() {
        return Err(Error::dim("deformed samples", n, deformed.len()));
    }
    Ok(())
}

fn check_image_grad(out: &RenderOutput, d_image: &[[f64; 3]]) -> Result<()> {
    let n = (out.width * out.height) as usize;
    if d_image.len() != n {
        return Err(Error::dim("image gradient", n, d_image.len()));
    }
    Ok(())
}

fn point_splat(
    s: &SurfaceSample,
    d: &DeformedSample,
    radius: f64,
    cam: &CameraModel,
    cfg: &RasterConfig,
) -> Option<Splat> {
    if !d.valid {
        return None;
    }
    let (uv, depth) = project_point(&d.position, cam, cfg.near)?;
    let r = cam.fx * radius / depth;
    Some(Splat {
        mean: uv,
        depth,
        extent: r,
        opacity: s.opacity(),
        color: s.color,
        kernel: Kernel::Point { radius: r },
    })
}

/// Renders the cloud with the point kernel.
pub fn render_points(
    cloud: &PsmCloud,
    deformed: &[DeformedSample],
    cam: &CameraModel,
    background: [f64; 3],
    cfg: &RasterConfig,
) -> Result<RenderOutput> {
    cam.validate()?;
    check_aligned(cloud.len(), deformed)?;
    let splats: Vec<Option<Splat>> = cloud
        .samples
        .par_iter()
        .zip(deformed.par_iter())
        .map(|(s, d)| point_splat(s, d, cloud.radius, cam, cfg))
        .collect();
    RenderOutput::new(splats, cam, background, cfg)
}

#[derive(Clone, Debug)]
pub struct PointGrads {
    pub position: Vec<Vec3>,
    pub opacity_raw: Vec<f64>,
    pub color: Vec<[f64; 3]>,
}

pub fn render_points_backward(
    out: &RenderOutput,
    cloud: &PsmCloud,
    deformed: &[DeformedSample],
    cam: &CameraModel,
    d_image: &[[f64; 3]],
) -> Result<PointGrads> {
    check_aligned(cloud.len(), deformed)?;
    check_image_grad(out, d_image)?;
    let sg = rasterize_backward(&out.splats, &out.raster, d_image, &out.cfg)?;
    let n = cloud.len();
    let mut g = PointGrads {
        position: vec![Vec3::zeros(); n],
        opacity_raw: vec![0.0; n],
        color: vec![[0.0; 3]; n],
    };
    for i in 0..n {
        let Some(splat) = &out.splats[i] else { continue };
        let s = &sg[i];
        let sig = splat.opacity;
        g.opacity_raw[i] = s.opacity * sig * (1.0 - sig);
        g.color[i] = s.color;
        let z = splat.depth;
        let d_depth = -cam.fx * cloud.radius / (z * z) * s.radius;
        g.position[i] = project_point_backward(&deformed[i].position, cam, s.mean, d_depth);
    }
    Ok(g)
}

struct GaussianGeom {
    q: Quat,
    scale: Vec3,
    cov: Mat3,
    proj: Projected,
    view_local: Vec3,
    view: Vec3,
}

fn gaussian_geom(
    g: &GaussianPrimitive,
    d: &DeformedSample,
    cam: &CameraModel,
    cfg: &RasterConfig,
) -> Option<GaussianGeom> {
    if !d.valid {
        return None;
    }
    let q = compose_rotation(&g.local_q, &d.rotation);
    let scale = g.scale();
    let r = q.to_mat() * Mat3::from_diagonal(&scale);
    let cov = r * r.transpose();
    let proj = project_gaussian(&d.position, &cov, cam, cfg)?;
    let ray = d.position - cam.center();
    let view = ray.normalize();
    let view_local = d.rotation.to_mat().transpose() * view;
    Some(GaussianGeom {
        q,
        scale,
        cov,
        proj,
        view_local,
        view,
    })
}

/// Renders bound Gaussians. SH coefficients live in each primitive's binding
/// frame, so the view direction is taken into that frame before evaluation.
pub fn render_gaussians(
    set: &GaussianSet,
    deformed: &[DeformedSample],
    cam: &CameraModel,
    background: [f64; 3],
    cfg: &RasterConfig,
) -> Result<RenderOutput> {
    cam.validate()?;
    set.validate()?;
    check_aligned(set.len(), deformed)?;
    let splats: Vec<Option<Splat>> = set
        .prims
        .par_iter()
        .zip(deformed.par_iter())
        .map(|(g, d)| {
            let geom = gaussian_geom(g, d, cam, cfg)?;
            Some(Splat {
                mean: geom.proj.mean2d,
                depth: geom.proj.depth,
                extent: geom.proj.radius,
                opacity: g.base.opacity(),
                color: sh_eval(&g.sh, set.sh_degree, &geom.view_local),
                kernel: Kernel::Gaussian { conic: geom.proj.conic },
            })
        })
        .collect();
    RenderOutput::new(splats, cam, background, cfg)
}

#[derive(Clone, Debug)]
pub struct GaussianGrads {
    pub position: Vec<Vec3>,
    /// Gradient on the binding rotation of each deformed sample.
    pub bind_q: Vec<Quat>,
    pub local_q: Vec<Quat>,
    pub log_scale: Vec<[f64; 3]>,
    pub opacity_raw: Vec<f64>,
    pub sh: Vec<ShCoeffs>,
}

pub fn render_gaussians_backward(
    out: &RenderOutput,
    set: &GaussianSet,
    deformed: &[DeformedSample],
    cam: &CameraModel,
    d_image: &[[f64; 3]],
) -> Result<GaussianGrads> {
    check_aligned(set.len(), deformed)?;
    check_image_grad(out, d_image)?;
    let cfg = out.cfg;
    let sg = rasterize_backward(&out.splats, &out.raster, d_image, &cfg)?;
    let degree = set.sh_degree;
    let per: Vec<_> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let mut res = (Vec3::zeros(), Quat::ZERO, Quat::ZERO, [0.0; 3], 0.0, [[0.0; 3]; 16]);
            let Some(splat) = &out.splats[i] else { return res };
            let (g, d, s) = (&set.prims[i], &deformed[i], &sg[i]);
            let geom = gaussian_geom(g, d, cam, &cfg).expect("visible in forward pass");

            let sig = splat.opacity;
            res.4 = s.opacity * sig * (1.0 - sig);

            let d_view_local = sh_eval_backward(&g.sh, degree, &geom.view_local, &s.color, &mut res.5);
            let r_bind = d.rotation.to_mat();
            let d_view = r_bind * d_view_local;
            let d_rbind = geom.view * d_view_local.transpose();
            let mut d_bind = quat_to_mat_vjp(&d.rotation, &d_rbind);
            let mut d_pos = vec_normalize_vjp(&(d.position - cam.center()), &d_view);

            let (dp, d_cov) = project_gaussian_backward(&d.position, &geom.cov, cam, &geom.proj, s.mean, s.conic);
            d_pos += dp;
            let (dq, ds) = covariance_backward(&geom.q, &geom.scale, &d_cov);
            let (d_local, d_bind2) = compose_rotation_backward(&g.local_q, &d.rotation, &dq);
            d_bind = d_bind.add(&d_bind2);
            res.0 = d_pos;
            res.1 = d_bind;
            res.2 = d_local;
            res.3 = std::array::from_fn(|k| ds[k] * geom.scale[k]);
            res
        })
        .collect();
    let n = set.len();
    let mut out_g = GaussianGrads {
        position: Vec::with_capacity(n),
        bind_q: Vec::with_capacity(n),
        local_q: Vec::with_capacity(n),
        log_scale: Vec::with_capacity(n),
        opacity_raw: Vec::with_capacity(n),
        sh: Vec::with_capacity(n),
    };
    for (p, b, l, s, o, sh) in per {
        out_g.position.push(p);
        out_g.bind_q.push(b);
        out_g.local_q.push(l);
        out_g.log_scale.push(s);
        out_g.opacity_raw.push(o);
        out_g.sh.push(sh);
    }
    Ok(out_g)
}
