use serde::{Deserialize, Serialize};

use super::template::{TemplateModel, POSE_FEATURES_PER_JOINT};
use crate::error::{Error, Result};
use crate::math::{
    axis_angle_vjp, quat_mul_vjp, quat_normalize_vjp, quat_to_mat_vjp, vec_normalize_vjp, Mat3, Quat, Vec3,
};

/// Pose (global rotation plus per-joint axis-angle rotations, radians) and
/// expression coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseExpr {
    pub global: [f64; 3],
    pub joints: Vec<[f64; 3]>,
    pub expr: Vec<f64>,
}

impl PoseExpr {
    pub fn zeros(model: &TemplateModel) -> Self {
        PoseExpr {
            global: [0.0; 3],
            joints: vec![[0.0; 3]; model.num_joints()],
            expr: vec![0.0; model.num_expr()],
        }
    }

    /// Builds from a flat pose vector `[global(3), joint_0(3), ...]`.
    pub fn from_flat(pose: &[f64], expr: &[f64]) -> Result<Self> {
        if pose.len() < 3 || !pose.len().is_multiple_of(3) {
            return Err(Error::InvalidInput(format!(
                "pose vector length {} is not 3 + 3·J",
                pose.len()
            )));
        }
        Ok(PoseExpr {
            global: [pose[0], pose[1], pose[2]],
            joints: pose[3..].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            expr: expr.to_vec(),
        })
    }

    pub fn pose_flat(&self) -> Vec<f64> {
        let mut out = self.global.to_vec();
        for j in &self.joints {
            out.extend_from_slice(j);
        }
        out
    }

    pub fn validate(&self, model: &TemplateModel) -> Result<()> {
        if self.joints.len() != model.num_joints() {
            return Err(Error::dim("pose joints", model.num_joints(), self.joints.len()));
        }
        if self.expr.len() != model.num_expr() {
            return Err(Error::dim("expression coefficients", model.num_expr(), self.expr.len()));
        }
        let finite = self.global.iter().all(|x| x.is_finite())
            && self.joints.iter().flatten().all(|x| x.is_finite())
            && self.expr.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("pose/expression parameters".into()));
        }
        Ok(())
    }
}

/// Posed mesh with per-vertex frames.
#[derive(Clone, Debug)]
pub struct DeformedMesh {
    pub vertices: Vec<Vec3>,
    /// Rotation part of the blended skinning transform, per vertex.
    pub vertex_rotations: Vec<Quat>,
    /// Area-weighted unit normals; zero for vertices without a
    /// non-degenerate incident face.
    pub vertex_normals: Vec<Vec3>,
    pub face_normals: Vec<Vec3>,
    pub face_areas: Vec<f64>,
    pub faces: Vec<[u32; 3]>,
}

/// Intermediate values needed by [`skin_backward`].
#[derive(Clone, Debug)]
pub struct SkinCache {
    shaped: Vec<Vec3>,
    features: Vec<f64>,
    local_q: Vec<Quat>,
    global_q: Vec<Quat>,
    root_q: Quat,
    blend_raw: Vec<Quat>,
    blend_ref: Vec<usize>,
    normal_raw: Vec<Vec3>,
}

/// Upstream gradients on a [`DeformedMesh`].
#[derive(Clone, Debug)]
pub struct MeshGrads {
    pub d_vertices: Vec<Vec3>,
    pub d_normals: Vec<Vec3>,
    pub d_rotations: Vec<Quat>,
}

impl MeshGrads {
    pub fn zeros(num_vertices: usize) -> Self {
        MeshGrads {
            d_vertices: vec![Vec3::zeros(); num_vertices],
            d_normals: vec![Vec3::zeros(); num_vertices],
            d_rotations: vec![Quat::ZERO; num_vertices],
        }
    }
}

/// Gradients with respect to the morphable model inputs.
#[derive(Clone, Debug)]
pub struct MorphGrads {
    pub d_global: [f64; 3],
    pub d_joints: Vec<[f64; 3]>,
    pub d_expr: Vec<f64>,
    pub d_corrective_pose: Vec<f64>,
    pub d_corrective_expr: Vec<f64>,
}

/// Rotation-residual pose features `vec(R(θ_j) − I)`; zero at rest.
pub fn pose_features(pe: &PoseExpr) -> Vec<f64> {
    let mut out = Vec::with_capacity(POSE_FEATURES_PER_JOINT * pe.joints.len());
    for aa in &pe.joints {
        let r = Quat::from_axis_angle(aa).to_mat() - Mat3::identity();
        for row in 0..3 {
            for col in 0..3 {
                out.push(r[(row, col)]);
            }
        }
    }
    out
}

fn contract_into(out: &mut [Vec3], basis: &[f64], coeffs: &[f64]) {
    let k = coeffs.len();
    if k == 0 || coeffs.iter().all(|&c| c == 0.0) {
        return;
    }
    for (v, o) in out.iter_mut().enumerate() {
        for c in 0..3 {
            let row = &basis[(v * 3 + c) * k..(v * 3 + c + 1) * k];
            o[c] += row.iter().zip(coeffs).map(|(b, x)| b * x).sum::<f64>();
        }
    }
}

/// `B_P(θ; 𝒫) + B_E(ψ; ℰ)`.
pub fn blendshape_offsets(model: &TemplateModel, pe: &PoseExpr) -> Result<Vec<Vec3>> {
    pe.validate(model)?;
    let mut out = vec![Vec3::zeros(); model.num_vertices()];
    contract_into(&mut out, &model.pose_basis, &pose_features(pe));
    contract_into(&mut out, &model.expr_basis, &pe.expr);
    Ok(out)
}

/// Learned per-vertex correction `B_P(θ; 𝒫′) + B_E(ψ; ℰ′)`.
pub fn corrective_offsets(model: &TemplateModel, pe: &PoseExpr) -> Result<Vec<Vec3>> {
    pe.validate(model)?;
    let mut out = vec![Vec3::zeros(); model.num_vertices()];
    contract_into(&mut out, &model.corrective_pose_basis, &pose_features(pe));
    contract_into(&mut out, &model.corrective_expr_basis, &pe.expr);
    Ok(out)
}

fn outer_into(out: &mut [f64], d: &[Vec3], coeffs: &[f64]) {
    let k = coeffs.len();
    for (v, dv) in d.iter().enumerate() {
        for c in 0..3 {
            let g = dv[c];
            let row = &mut out[(v * 3 + c) * k..(v * 3 + c + 1) * k];
            for (r, x) in row.iter_mut().zip(coeffs) {
                *r += g * x;
            }
        }
    }
}

/// Gradients of [`corrective_offsets`] with respect to `(𝒫′, ℰ′)` given
/// the upstream gradient on the offsets.
pub fn corrective_offsets_vjp(
    model: &TemplateModel,
    pe: &PoseExpr,
    d_offsets: &[Vec3],
) -> Result<(Vec<f64>, Vec<f64>)> {
    pe.validate(model)?;
    if d_offsets.len() != model.num_vertices() {
        return Err(Error::dim("offset gradient", model.num_vertices(), d_offsets.len()));
    }
    let mut dp = vec![0.0; model.corrective_pose_basis.len()];
    let mut de = vec![0.0; model.corrective_expr_basis.len()];
    outer_into(&mut dp, d_offsets, &pose_features(pe));
    outer_into(&mut de, d_offsets, &pe.expr);
    Ok((dp, de))
}

/// Linear blend skinning of the shaped template.
pub fn skin(model: &TemplateModel, pe: &PoseExpr) -> Result<DeformedMesh> {
    skin_with_cache(model, pe).map(|(mesh, _)| mesh)
}

pub fn skin_with_cache(model: &TemplateModel, pe: &PoseExpr) -> Result<(DeformedMesh, SkinCache)> {
    pe.validate(model)?;
    let nv = model.num_vertices();
    let nj = model.num_joints();
    let features = pose_features(pe);

    let mut shaped = model.rest_vertices.clone();
    contract_into(&mut shaped, &model.pose_basis, &features);
    contract_into(&mut shaped, &model.expr_basis, &pe.expr);
    contract_into(&mut shaped, &model.corrective_pose_basis, &features);
    contract_into(&mut shaped, &model.corrective_expr_basis, &pe.expr);

    // Forward kinematics; the global rotation acts as the parent of the root.
    let local_q: Vec<Quat> = pe.joints.iter().map(Quat::from_axis_angle).collect();
    let root_q = Quat::from_axis_angle(&pe.global);
    let mut global_q = vec![Quat::IDENTITY; nj];
    let mut global_t = vec![Vec3::zeros(); nj];
    let jp = &model.joint_positions;
    for &j in model.joint_order() {
        let parent = model.joint_parents[j];
        if parent < 0 {
            global_q[j] = root_q.mul(&local_q[j]);
            global_t[j] = jp[j];
        } else {
            let p = parent as usize;
            global_q[j] = global_q[p].mul(&local_q[j]);
            global_t[j] = global_q[p].to_mat() * (jp[j] - jp[p]) + global_t[p];
        }
    }
    let global_r: Vec<Mat3> = global_q.iter().map(Quat::to_mat).collect();

    let mut vertices = Vec::with_capacity(nv);
    let mut vertex_rotations = Vec::with_capacity(nv);
    let mut blend_raw = Vec::with_capacity(nv);
    let mut blend_ref = Vec::with_capacity(nv);
    for v in 0..nv {
        let weights = &model.skin_weights[v * nj..(v + 1) * nj];
        let mut x = Vec3::zeros();
        for j in 0..nj {
            let w = weights[j];
            if w != 0.0 {
                x += w * (global_r[j] * (shaped[v] - jp[j]) + global_t[j]);
            }
        }
        vertices.push(x);
        let reference = argmax(weights);
        let mut m = Quat::ZERO;
        for j in 0..nj {
            let w = weights[j];
            if w != 0.0 {
                m.add_scaled(&global_q[j], w * hemisphere_sign(&global_q[j], &global_q[reference]));
            }
        }
        vertex_rotations.push(m.normalize());
        blend_raw.push(m);
        blend_ref.push(reference);
    }

    let normals = compute_normals(&vertices, &model.faces);
    let mesh = DeformedMesh {
        vertices,
        vertex_rotations,
        vertex_normals: normals.vertex_normals,
        face_normals: normals.face_normals,
        face_areas: normals.face_areas,
        faces: model.faces.clone(),
    };
    let cache = SkinCache {
        shaped,
        features,
        local_q,
        global_q,
        root_q,
        blend_raw,
        blend_ref,
        normal_raw: normals.vertex_raw,
    };
    Ok((mesh, cache))
}

fn argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in w.iter().enumerate() {
        if x > w[best] {
            best = j;
        }
    }
    best
}

fn hemisphere_sign(q: &Quat, reference: &Quat) -> f64 {
    if q.dot(reference) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

struct Normals {
    vertex_normals: Vec<Vec3>,
    vertex_raw: Vec<Vec3>,
    face_normals: Vec<Vec3>,
    face_areas: Vec<f64>,
}

fn compute_normals(vertices: &[Vec3], faces: &[[u32; 3]]) -> Normals {
    let mut vertex_raw = vec![Vec3::zeros(); vertices.len()];
    let mut face_normals = Vec::with_capacity(faces.len());
    let mut face_areas = Vec::with_capacity(faces.len());
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        face_areas.push(0.5 * len);
        face_normals.push(if len > 0.0 { n / len } else { Vec3::zeros() });
        for &i in f {
            vertex_raw[i as usize] += n;
        }
    }
    let vertex_normals = vertex_raw
        .iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    Normals {
        vertex_normals,
        vertex_raw,
        face_normals,
        face_areas,
    }
}

/// Folds gradients on unit vertex normals into gradients on vertex positions.
pub fn vertex_normals_vjp(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
    normal_raw: &[Vec3],
    d_normals: &[Vec3],
    d_vertices: &mut [Vec3],
) {
    let d_raw: Vec<Vec3> = normal_raw
        .iter()
        .zip(d_normals)
        .map(|(n, d)| vec_normalize_vjp(n, d))
        .collect();
    for f in faces {
        let g = d_raw[f[0] as usize] + d_raw[f[1] as usize] + d_raw[f[2] as usize];
        if g == Vec3::zeros() {
            continue;
        }
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let e1 = b - a;
        let e2 = c - a;
        let d_e1 = e2.cross(&g);
        let d_e2 = g.cross(&e1);
        d_vertices[f[1] as usize] += d_e1;
        d_vertices[f[2] as usize] += d_e2;
        d_vertices[f[0] as usize] -= d_e1 + d_e2;
    }
}

/// Reverse pass of [`skin_with_cache`].
pub fn skin_backward(
    model: &TemplateModel,
    pe: &PoseExpr,
    mesh: &DeformedMesh,
    cache: &SkinCache,
    grads: &MeshGrads,
) -> MorphGrads {
    let nv = model.num_vertices();
    let nj = model.num_joints();
    let np = model.num_pose_features();
    let k = model.num_expr();
    let jp = &model.joint_positions;

    let mut d_x = grads.d_vertices.clone();
    vertex_normals_vjp(
        &mesh.vertices,
        &model.faces,
        &cache.normal_raw,
        &grads.d_normals,
        &mut d_x,
    );

    let global_r: Vec<Mat3> = cache.global_q.iter().map(Quat::to_mat).collect();
    let mut d_rot = vec![Mat3::zeros(); nj];
    let mut d_gq = vec![Quat::ZERO; nj];
    let mut d_gt = vec![Vec3::zeros(); nj];
    let mut d_shaped = vec![Vec3::zeros(); nv];

    for v in 0..nv {
        let weights = &model.skin_weights[v * nj..(v + 1) * nj];
        let dx = d_x[v];
        let dq = grads.d_rotations[v];
        let d_blend = if dq == Quat::ZERO {
            None
        } else {
            Some(quat_normalize_vjp(&cache.blend_raw[v], &dq))
        };
        let reference = cache.global_q[cache.blend_ref[v]];
        for j in 0..nj {
            let w = weights[j];
            if w == 0.0 {
                continue;
            }
            let local = cache.shaped[v] - jp[j];
            d_shaped[v] += w * (global_r[j].transpose() * dx);
            d_rot[j] += w * dx * local.transpose();
            d_gt[j] += w * dx;
            if let Some(db) = d_blend {
                let s = hemisphere_sign(&cache.global_q[j], &reference);
                d_gq[j].add_scaled(&db, w * s);
            }
        }
    }
    for j in 0..nj {
        let g = quat_to_mat_vjp(&cache.global_q[j], &d_rot[j]);
        d_gq[j].add_scaled(&g, 1.0);
    }

    let mut d_lq = vec![Quat::ZERO; nj];
    let mut d_root = Quat::ZERO;
    for &j in model.joint_order().iter().rev() {
        let parent = model.joint_parents[j];
        if parent < 0 {
            let (dr, dl) = quat_mul_vjp(&cache.root_q, &cache.local_q[j], &d_gq[j]);
            d_root.add_scaled(&dr, 1.0);
            d_lq[j].add_scaled(&dl, 1.0);
        } else {
            let p = parent as usize;
            let (dp, dl) = quat_mul_vjp(&cache.global_q[p], &cache.local_q[j], &d_gq[j]);
            d_lq[j].add_scaled(&dl, 1.0);
            let dt = d_gt[j];
            let g = quat_to_mat_vjp(&cache.global_q[p], &(dt * (jp[j] - jp[p]).transpose()));
            let mut acc = dp;
            acc.add_scaled(&g, 1.0);
            d_gq[p].add_scaled(&acc, 1.0);
            d_gt[p] += dt;
        }
    }

    // Blendshape contractions.
    let mut d_feat = vec![0.0; np];
    let mut d_expr = vec![0.0; k];
    for v in 0..nv {
        for c in 0..3 {
            let g = d_shaped[v][c];
            if g == 0.0 {
                continue;
            }
            let row = (v * 3 + c) * np;
            for (f, df) in d_feat.iter_mut().enumerate() {
                *df += g * (model.pose_basis[row + f] + model.corrective_pose_basis[row + f]);
            }
            let row = (v * 3 + c) * k;
            for (e, de) in d_expr.iter_mut().enumerate() {
                *de += g * (model.expr_basis[row + e] + model.corrective_expr_basis[row + e]);
            }
        }
    }
    for j in 0..nj {
        let block = &d_feat[j * POSE_FEATURES_PER_JOINT..(j + 1) * POSE_FEATURES_PER_JOINT];
        let g = Mat3::from_row_slice(block);
        let dq = quat_to_mat_vjp(&cache.local_q[j], &g);
        d_lq[j].add_scaled(&dq, 1.0);
    }
    let d_joints = (0..nj).map(|j| axis_angle_vjp(&pe.joints[j], &d_lq[j])).collect();
    let d_global = axis_angle_vjp(&pe.global, &d_root);

    let mut d_corrective_pose = vec![0.0; model.corrective_pose_basis.len()];
    let mut d_corrective_expr = vec![0.0; model.corrective_expr_basis.len()];
    outer_into(&mut d_corrective_pose, &d_shaped, &cache.features);
    outer_into(&mut d_corrective_expr, &d_shaped, &pe.expr);

    MorphGrads {
        d_global,
        d_joints,
        d_expr,
        d_corrective_pose,
        d_corrective_expr,
    }
}
