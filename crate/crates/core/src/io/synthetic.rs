//! Synthetic dataset generator: a ground-truth Gaussian avatar bound to a
//! perturbed copy of the template, rendered along a scripted orbit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, Stage};
use super::dataset::{save_mask, save_png, DatasetManifest, ManifestFrame, MANIFEST_VERSION};
use crate::error::{Error, Result};
use crate::frame::Image;
use crate::math::{logit, Quat, Vec3};
use crate::morphable::{skin, PoseExpr, TemplateModel};
use crate::psm::{deform_samples, sample_surface, PsmCloud, DEFAULT_L_MAX};
use crate::splat::sh::{SH_C0, SH_DC_OFFSET};
use crate::splat::{render_gaussians, CameraModel, GaussianPrimitive, GaussianSet, RasterConfig};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.psav";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub distance: f64,
    /// Orbit half-range around the front view, degrees.
    pub azimuth_range: f64,
    pub elevation_range: f64,
    pub expr_amplitude: f64,
    /// Peak joint rotation, radians.
    pub joint_amplitude: f64,
    /// Amplitude of the ground-truth expression corrective field, meters
    /// per unit expression coefficient.
    pub perturbation: f64,
    pub gaussians: usize,
    /// Maximum normal offset of the hair layer, meters.
    pub hair_offset: f64,
    pub background: [f64; 3],
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            frames: 60,
            width: 128,
            height: 128,
            focal: 180.0,
            distance: 0.55,
            azimuth_range: 35.0,
            elevation_range: 10.0,
            expr_amplitude: 1.5,
            joint_amplitude: 0.15,
            perturbation: 0.006,
            gaussians: 5000,
            hair_offset: 0.012,
            background: [1.0; 3],
        }
    }
}

/// One scripted frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptFrame {
    pub pe: PoseExpr,
    pub cam: CameraModel,
}

/// Smooth periodic trajectory: the camera sweeps the orbit while the jaw,
/// neck and expressions oscillate at different frequencies.
pub fn orbit_script(model: &TemplateModel, cfg: &SyntheticConfig, seed: u64) -> Vec<ScriptFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7363_7269_7074);
    let k = model.num_expr();
    let nj = model.num_joints();
    let phases: Vec<f64> = (0..k + 3 * nj + 2)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let target = Vec3::new(0.0, 0.0, 0.0);
    let tau = std::f64::consts::TAU;
    (0..cfg.frames)
        .map(|i| {
            let t = i as f64 / cfg.frames.max(1) as f64;
            let mut pe = PoseExpr::zeros(model);
            for (e, x) in pe.expr.iter_mut().enumerate() {
                *x = cfg.expr_amplitude * (tau * (1 + e % 3) as f64 * t + phases[e]).sin();
            }
            for (j, joint) in pe.joints.iter_mut().enumerate() {
                for (a, v) in joint.iter_mut().enumerate() {
                    let scale = if a == 0 { 1.0 } else { 0.5 };
                    *v = scale
                        * cfg.joint_amplitude
                        * (tau * (1 + (j + a) % 2) as f64 * t + phases[k + 3 * j + a]).sin();
                }
            }
            let az = cfg.azimuth_range.to_radians() * (tau * t + phases[k + 3 * nj]).sin();
            let el = cfg.elevation_range.to_radians() * (2.0 * tau * t + phases[k + 3 * nj + 1]).sin();
            let cam = CameraModel::orbit(&target, az, el, cfg.distance, cfg.focal, cfg.width, cfg.height);
            ScriptFrame { pe, cam }
        })
        .collect()
}

fn procedural_color(p: &Vec3, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let near = |c: Vec3, w: f64| (-(p - c).norm_squared() / (w * w)).exp();
    let mut col = Vec3::new(0.62, 0.40, 0.30);
    let hair = ((p.y - 0.02) / 0.02).clamp(0.0, 1.0) * ((0.075 - p.z) / 0.03).clamp(0.0, 1.0);
    col = col.lerp(
        &Vec3::new(0.10, 0.06, 0.035),
        hair.max(((p.y - 0.07) / 0.02).clamp(0.0, 1.0)),
    );
    let lips = near(Vec3::new(0.0, -0.045, 0.085), 0.014);
    col = col.lerp(&Vec3::new(0.55, 0.08, 0.08), lips);
    for x in [-0.03, 0.03] {
        col = col.lerp(&Vec3::new(0.04, 0.04, 0.05), near(Vec3::new(x, 0.015, 0.085), 0.008));
        col = col.lerp(&Vec3::new(0.12, 0.07, 0.04), near(Vec3::new(x, 0.035, 0.088), 0.008));
    }
    let jitter = rng.random_range(-0.04..0.04);
    [0, 1, 2].map(|c| (col[c] + jitter).clamp(0.0, 1.0))
}

/// Ground truth: the template with a smooth per-vertex expression
/// corrective field, and a Gaussian set bound to it.
pub fn ground_truth_avatar(
    template: &TemplateModel,
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<(TemplateModel, GaussianSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6774_6176);
    let rest = skin(template, &PoseExpr::zeros(template))?;
    let k = template.num_expr();
    let nv = template.num_vertices();

    let waves: Vec<(Vec3, f64)> = (0..k)
        .map(|_| {
            let dir = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let dir = dir.normalize() * std::f64::consts::TAU / 0.09;
            (dir, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let mut corr_expr = vec![0.0; nv * 3 * k];
    for v in 0..nv {
        let p = template.rest_vertices[v];
        let n = rest.vertex_normals[v];
        for (e, (dir, phase)) in waves.iter().enumerate() {
            let amp = cfg.perturbation * (dir.dot(&p) + phase).sin();
            for c in 0..3 {
                corr_expr[(v * 3 + c) * k + e] = amp * n[c];
            }
        }
    }
    let mut gt = template.clone();
    gt.set_correctives(template.corrective_pose_basis.clone(), corr_expr)?;

    let mut samples = sample_surface(&rest, &template.region_mask, cfg.gaussians.max(1), seed)?;
    let area: f64 = rest
        .face_areas
        .iter()
        .zip(&template.region_mask)
        .filter(|(_, m)| **m)
        .map(|(a, _)| a)
        .sum();
    let spacing = (area / samples.len() as f64).sqrt();
    let placed = deform_samples(&rest, &samples)?;
    let mut prims = Vec::with_capacity(samples.len());
    for (s, d) in samples.iter_mut().zip(&placed) {
        let p = d.position;
        let on_top = p.y > 0.02 && p.z < 0.075 || p.y > 0.07;
        if on_top && rng.random_bool(0.5) {
            s.offset = rng.random_range(0.0..cfg.hair_offset);
        }
        s.opacity_raw = logit(0.95);
        s.color = procedural_color(&p, &mut rng);
        let mut sh = [[0.0; 3]; 16];
        sh[0] = s.color.map(|c| (c - SH_DC_OFFSET) / SH_C0);
        for coeff in sh.iter_mut().take(4).skip(1) {
            *coeff = [rng.random_range(-0.08..0.08); 3];
        }
        // Flat discs lying in the surface: local z goes to the rest normal.
        let local_q = rotation_between(&Vec3::z(), &d.normal);
        let flat = 0.25 * spacing;
        prims.push(GaussianPrimitive {
            base: *s,
            local_q,
            log_scale: [(0.7 * spacing).ln(), (0.7 * spacing).ln(), flat.ln()],
            sh,
        });
    }
    Ok((gt, GaussianSet { prims, sh_degree: 1 }))
}

fn rotation_between(a: &Vec3, b: &Vec3) -> Quat {
    let c = a.cross(b);
    let w = 1.0 + a.dot(b);
    if w < 1e-9 {
        return Quat::new(0.0, 1.0, 0.0, 0.0);
    }
    Quat::new(w, c.x, c.y, c.z).normalize()
}

/// Renders one frame of the ground truth.
pub fn render_ground_truth(
    gt_model: &TemplateModel,
    set: &GaussianSet,
    frame: &ScriptFrame,
    background: [f64; 3],
) -> Result<(Image, Vec<bool>)> {
    let mesh = skin(gt_model, &frame.pe)?;
    let d = deform_samples(&mesh, &set.samples())?;
    let out = render_gaussians(set, &d, &frame.cam, background, &RasterConfig::default())?;
    let mask = out.alpha.iter().map(|a| *a > 0.5).collect();
    Ok((Image::from_data(out.width, out.height, out.image)?, mask))
}

/// Writes `template.json`, `manifest.json`, `frames/*.png`, `masks/*.png`
/// and the ground-truth checkpoint into `dir`.
pub fn make_synthetic(
    template: &TemplateModel,
    script: &[ScriptFrame],
    cfg: &SyntheticConfig,
    seed: u64,
    dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    if script.is_empty() {
        return Err(Error::Dataset("synthetic script has no frames".into()));
    }
    for (index, f) in script.iter().enumerate() {
        f.pe.validate(template).map_err(|e| Error::Frame {
            index,
            msg: e.to_string(),
        })?;
        f.cam.validate().map_err(|e| Error::Frame {
            index,
            msg: e.to_string(),
        })?;
    }
    let dir = dir.as_ref();
    for sub in ["frames", "masks"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let (gt_model, set) = ground_truth_avatar(template, cfg, seed)?;
    template.save(dir.join("template.json"))?;

    let mut frames = Vec::with_capacity(script.len());
    for (i, f) in script.iter().enumerate() {
        let (img, mask) = render_ground_truth(&gt_model, &set, f, cfg.background)?;
        let image = format!("frames/{i:04}.png");
        let mask_path = format!("masks/{i:04}.png");
        save_png(&img, dir.join(&image))?;
        save_mask(&mask, img.width, img.height, dir.join(&mask_path))?;
        frames.push(ManifestFrame {
            image,
            pose: f.pe.pose_flat(),
            expression: f.pe.expr.clone(),
            camera: f.cam,
            mask: Some(mask_path),
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        template: "template.json".into(),
        frames,
    };
    manifest.save(dir.join("manifest.json"))?;

    let cloud = PsmCloud {
        samples: set.samples(),
        l_max: DEFAULT_L_MAX,
        radius: 0.5 * template.mean_masked_edge_length(),
        seed,
    };
    Checkpoint {
        stage: Stage::Appearance,
        seed,
        config: serde_json::to_string(cfg)?,
        cloud,
        gaussians: Some(set),
        corrective_pose: gt_model.corrective_pose_basis.clone(),
        corrective_expr: gt_model.corrective_expr_basis.clone(),
    }
    .save(dir.join(GROUND_TRUTH_FILE))?;
    Ok(manifest)
}
