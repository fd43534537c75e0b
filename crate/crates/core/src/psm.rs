//! Point-based shape model: mesh-anchored on-surface and off-surface samples.
//!
//! A sample is fixed to its face by barycentric coordinates and an offset
//! along the interpolated normal, so the same list of samples follows the
//! template through every pose and expression in one-to-one correspondence.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{logit, quat_normalize_vjp, vec_normalize_vjp, Quat, Vec3};
use crate::morphable::{skin, DeformedMesh, MeshGrads, PoseExpr, TemplateModel};

/// Default maximum normal offset for off-surface samples, in meters.
pub const DEFAULT_L_MAX: f64 = 0.30;
/// Default pruning threshold on the per-sample maximum compositing weight.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub face_index: u32,
    pub bary: [f64; 3],
    /// Offset along the interpolated normal; zero for on-mesh samples.
    pub offset: f64,
    pub opacity_raw: f64,
    pub color: [f64; 3],
}

impl SurfaceSample {
    pub fn opacity(&self) -> f64 {
        crate::math::sigmoid(self.opacity_raw)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsmCloud {
    pub samples: Vec<SurfaceSample>,
    pub l_max: f64,
    /// World-space point radius used by the point kernel.
    pub radius: f64,
    pub seed: u64,
}

impl PsmCloud {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformedSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub rotation: Quat,
    /// False when the interpolated normal vanished; such samples are
    /// skipped by the renderer.
    pub valid: bool,
}

/// Settings for [`build_cloud`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Number of on-mesh samples.
    pub num_samples: usize,
    /// Off-mesh samples per on-mesh sample, in `[0, 1]`.
    pub offsurface_ratio: f64,
    pub l_max: f64,
    /// World-space point radius; `0` selects half the mean masked edge length.
    pub radius: f64,
    pub init_opacity: f64,
    pub init_color: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            num_samples: 6000,
            offsurface_ratio: 1.0,
            l_max: DEFAULT_L_MAX,
            radius: 0.0,
            init_opacity: 0.1,
            init_color: 0.5,
        }
    }
}

fn sample_bary(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    let s = r1.sqrt();
    [1.0 - s, s * (1.0 - r2), s * r2]
}

/// Draws `count` samples on masked faces with probability proportional to
/// face area and uniform barycentric coordinates.
pub fn sample_surface(mesh: &DeformedMesh, mask: &[bool], count: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
    if count == 0 {
        return Err(Error::Sampling("sample count must be at least 1".into()));
    }
    if mask.len() != mesh.face_areas.len() {
        return Err(Error::dim("region mask", mesh.face_areas.len(), mask.len()));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Sampling("region mask selects no faces".into()));
    }
    let weights: Vec<f64> = mesh
        .face_areas
        .iter()
        .zip(mask)
        .map(|(&a, &m)| if m && a.is_finite() { a } else { 0.0 })
        .collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::Sampling("all masked faces are degenerate".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let face_index = dist.sample(&mut rng) as u32;
            SurfaceSample {
                face_index,
                bary: sample_bary(&mut rng),
                offset: 0.0,
                opacity_raw: 0.0,
                color: [0.5; 3],
            }
        })
        .collect())
}

/// Derives off-mesh samples from on-mesh parents, each with an offset drawn
/// from `U[0, l_max]` along the normal.
pub fn sample_offsurface(
    on_samples: &[SurfaceSample],
    l_max: f64,
    ratio: f64,
    seed: u64,
) -> Result<Vec<SurfaceSample>> {
    if !(l_max >= 0.0 && l_max.is_finite()) {
        return Err(Error::InvalidInput(format!("l_max must be ≥ 0, got {l_max}")));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidInput(format!(
            "off-surface ratio must be in [0, 1], got {ratio}"
        )));
    }
    let count = (ratio * on_samples.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f66_6673_7572_6661);
    let mut parents: Vec<usize> = if count == on_samples.len() {
        (0..count).collect()
    } else {
        rand::seq::index::sample(&mut rng, on_samples.len(), count).into_vec()
    };
    parents.sort_unstable();
    Ok(parents
        .into_iter()
        .map(|p| {
            let mut s = on_samples[p];
            s.offset = if l_max > 0.0 {
                rng.random_range(0.0..=l_max)
            } else {
                0.0
            };
            s
        })
        .collect())
}

/// Samples a full cloud (on- and off-mesh) on the template's rest pose.
pub fn build_cloud(model: &TemplateModel, cfg: &SamplingConfig, seed: u64) -> Result<PsmCloud> {
    let rest = skin(model, &PoseExpr::zeros(model))?;
    let mut samples = sample_surface(&rest, &model.region_mask, cfg.num_samples, seed)?;
    let off = sample_offsurface(&samples, cfg.l_max, cfg.offsurface_ratio, seed)?;
    samples.extend(off);
    let opacity_raw = logit(cfg.init_opacity);
    for s in samples.iter_mut() {
        s.opacity_raw = opacity_raw;
        s.color = [cfg.init_color; 3];
    }
    let radius = if cfg.radius > 0.0 {
        cfg.radius
    } else {
        0.5 * model.mean_masked_edge_length()
    };
    if !(radius > 0.0) {
        return Err(Error::Sampling("point radius must be positive".into()));
    }
    Ok(PsmCloud {
        samples,
        l_max: cfg.l_max,
        radius,
        seed,
    })
}

fn blend_rotation(mesh: &DeformedMesh, face: &[u32; 3], bary: &[f64; 3]) -> (Quat, usize) {
    let reference = if bary[0] >= bary[1] && bary[0] >= bary[2] {
        0
    } else if bary[1] >= bary[2] {
        1
    } else {
        2
    };
    let q_ref = mesh.vertex_rotations[face[reference] as usize];
    let mut m = Quat::ZERO;
    for k in 0..3 {
        let q = mesh.vertex_rotations[face[k] as usize];
        let s = if q.dot(&q_ref) < 0.0 { -1.0 } else { 1.0 };
        m.add_scaled(&q, s * bary[k]);
    }
    (m, reference)
}

fn deform_one(mesh: &DeformedMesh, s: &SurfaceSample) -> DeformedSample {
    let face = &mesh.faces[s.face_index as usize];
    let [a, b, c] = s.bary;
    let v = face.map(|i| mesh.vertices[i as usize]);
    let n = face.map(|i| mesh.vertex_normals[i as usize]);
    let on_surface = a * v[0] + b * v[1] + c * v[2];
    let n_raw = a * n[0] + b * n[1] + c * n[2];
    let n_len = n_raw.norm();
    let (m, _) = blend_rotation(mesh, face, &s.bary);
    if n_len < 1e-12 {
        return DeformedSample {
            position: on_surface,
            normal: Vec3::zeros(),
            rotation: m.normalize(),
            valid: false,
        };
    }
    let normal = n_raw / n_len;
    DeformedSample {
        position: on_surface + s.offset * normal,
        normal,
        rotation: m.normalize(),
        valid: true,
    }
}

/// Places every sample of `cloud` on the deformed mesh.
pub fn deform_samples(mesh: &DeformedMesh, cloud: &[SurfaceSample]) -> Result<Vec<DeformedSample>> {
    let nf = mesh.faces.len();
    if let Some(bad) = cloud.iter().position(|s| s.face_index as usize >= nf) {
        return Err(Error::InvalidInput(format!(
            "sample {bad} references face {} but the mesh has {nf} faces",
            cloud[bad].face_index
        )));
    }
    Ok(cloud.par_iter().map(|s| deform_one(mesh, s)).collect())
}

/// Accumulates gradients on deformed sample positions and rotations into
/// gradients on the mesh (vertices, vertex normals, vertex rotations).
pub fn deform_backward(
    mesh: &DeformedMesh,
    cloud: &[SurfaceSample],
    d_positions: &[Vec3],
    d_rotations: &[Quat],
    out: &mut MeshGrads,
) {
    for (i, s) in cloud.iter().enumerate() {
        let dp = d_positions[i];
        let dq = d_rotations[i];
        if dp == Vec3::zeros() && dq == Quat::ZERO {
            continue;
        }
        let face = &mesh.faces[s.face_index as usize];
        let [a, b, c] = s.bary;
        let w = [a, b, c];
        let n = face.map(|i| mesh.vertex_normals[i as usize]);
        let n_raw = a * n[0] + b * n[1] + c * n[2];
        if n_raw.norm() < 1e-12 {
            continue;
        }
        for k in 0..3 {
            out.d_vertices[face[k] as usize] += w[k] * dp;
        }
        if s.offset != 0.0 {
            let dn_raw = vec_normalize_vjp(&n_raw, &(s.offset * dp));
            for k in 0..3 {
                out.d_normals[face[k] as usize] += w[k] * dn_raw;
            }
        }
        if dq != Quat::ZERO {
            let (m, reference) = blend_rotation(mesh, face, &s.bary);
            let dm = quat_normalize_vjp(&m, &dq);
            let q_ref = mesh.vertex_rotations[face[reference] as usize];
            for k in 0..3 {
                let q = mesh.vertex_rotations[face[k] as usize];
                let sign = if q.dot(&q_ref) < 0.0 { -1.0 } else { 1.0 };
                out.d_rotations[face[k] as usize].add_scaled(&dm, sign * w[k]);
            }
        }
    }
}

/// Removes samples whose visibility statistic is below `threshold`,
/// preserving the order of the survivors.
pub fn prune(cloud: &PsmCloud, stats: &[f64], threshold: f64) -> Result<PsmCloud> {
    if stats.len() != cloud.samples.len() {
        return Err(Error::dim("visibility statistics", cloud.samples.len(), stats.len()));
    }
    let samples = cloud
        .samples
        .iter()
        .zip(stats)
        .filter(|(_, &s)| s >= threshold)
        .map(|(s, _)| *s)
        .collect();
    Ok(PsmCloud {
        samples,
        ..cloud.clone()
    })
}
