use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Number of pose features contributed by each joint (a flattened 3×3
/// rotation residual).
pub const POSE_FEATURES_PER_JOINT: usize = 9;

const SKIN_WEIGHT_TOL: f64 = 1e-5;

/// A skinned morphable mesh.
///
/// Bases are stored row-major as `[vertex][axis][component]`, i.e. entry
/// `(v, c, k)` lives at `(v * 3 + c) * K + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateModel {
    pub rest_vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub joint_positions: Vec<Vec3>,
    /// Parent joint index, `-1` for the root (joint 0).
    pub joint_parents: Vec<i32>,
    /// `V × J`, row-major.
    pub skin_weights: Vec<f64>,
    /// `V × 3 × 9J`.
    pub pose_basis: Vec<f64>,
    /// `V × 3 × K`.
    pub expr_basis: Vec<f64>,
    pub corrective_pose_basis: Vec<f64>,
    pub corrective_expr_basis: Vec<f64>,
    /// Faces eligible for surface sampling.
    pub region_mask: Vec<bool>,
    num_expr: usize,
    /// Joints in parent-before-child order.
    joint_order: Vec<usize>,
}

impl TemplateModel {
    /// Assembles and validates a model. Corrective bases default to zero
    /// when `None`; the region mask defaults to every face.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rest_vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        joint_positions: Vec<Vec3>,
        joint_parents: Vec<i32>,
        skin_weights: Vec<f64>,
        pose_basis: Vec<f64>,
        expr_basis: Vec<f64>,
        num_expr: usize,
        corrective_pose_basis: Option<Vec<f64>>,
        corrective_expr_basis: Option<Vec<f64>>,
        region_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        let nv = rest_vertices.len();
        let nf = faces.len();
        let nj = joint_positions.len();
        let mut model = TemplateModel {
            corrective_pose_basis: corrective_pose_basis.unwrap_or_else(|| vec![0.0; pose_basis.len()]),
            corrective_expr_basis: corrective_expr_basis.unwrap_or_else(|| vec![0.0; expr_basis.len()]),
            region_mask: region_mask.unwrap_or_else(|| vec![true; nf]),
            rest_vertices,
            faces,
            joint_positions,
            joint_parents,
            skin_weights,
            pose_basis,
            expr_basis,
            num_expr,
            joint_order: Vec::new(),
        };
        if nv == 0 {
            return Err(Error::TemplateParse("template has no vertices".into()));
        }
        if nj == 0 {
            return Err(Error::JointHierarchy("template has no joints".into()));
        }
        model.check_dims()?;
        for (fi, f) in model.faces.iter().enumerate() {
            for &v in f {
                if v as usize >= nv {
                    return Err(Error::FaceIndex {
                        face: fi,
                        vertex: v as usize,
                        num_vertices: nv,
                    });
                }
            }
        }
        for v in 0..nv {
            let row = &model.skin_weights[v * nj..(v + 1) * nj];
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() {
                    return Err(Error::NonFinite(format!("skin weight ({v}, {j})")));
                }
                if w < 0.0 {
                    return Err(Error::NegativeSkinWeight {
                        vertex: v,
                        joint: j,
                        value: w,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SKIN_WEIGHT_TOL {
                return Err(Error::SkinWeightSum { vertex: v, sum });
            }
        }
        for (name, data) in [
            ("pose_basis", &model.pose_basis),
            ("expr_basis", &model.expr_basis),
            ("corrective_pose_basis", &model.corrective_pose_basis),
            ("corrective_expr_basis", &model.corrective_expr_basis),
        ] {
            if data.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        if model
            .rest_vertices
            .iter()
            .chain(model.joint_positions.iter())
            .any(|p| !p.iter().all(|x| x.is_finite()))
        {
            return Err(Error::NonFinite("vertex or joint positions".into()));
        }
        model.joint_order = joint_order(&model.joint_parents)?;
        Ok(model)
    }

    fn check_dims(&self) -> Result<()> {
        let nv = self.num_vertices();
        let nj = self.num_joints();
        let nf = self.faces.len();
        let np = self.num_pose_features();
        let k = self.num_expr;
        let checks = [
            ("joints.parents", nj, self.joint_parents.len()),
            ("skin_weights", nv * nj, self.skin_weights.len()),
            ("pose_basis", nv * 3 * np, self.pose_basis.len()),
            ("expr_basis", nv * 3 * k, self.expr_basis.len()),
            ("corrective_pose_basis", nv * 3 * np, self.corrective_pose_basis.len()),
            ("corrective_expr_basis", nv * 3 * k, self.corrective_expr_basis.len()),
            ("region_mask", nf, self.region_mask.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::dim(what, expected, got));
            }
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.rest_vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_joints(&self) -> usize {
        self.joint_positions.len()
    }

    pub fn num_expr(&self) -> usize {
        self.num_expr
    }

    pub fn num_pose_features(&self) -> usize {
        POSE_FEATURES_PER_JOINT * self.num_joints()
    }

    /// Length of a flattened pose vector: global rotation plus one
    /// axis-angle per joint.
    pub fn pose_dim(&self) -> usize {
        3 + 3 * self.num_joints()
    }

    pub fn skin_weight(&self, vertex: usize, joint: usize) -> f64 {
        self.skin_weights[vertex * self.num_joints() + joint]
    }

    pub(crate) fn joint_order(&self) -> &[usize] {
        &self.joint_order
    }

    /// Zeroes both corrective bases.
    pub fn reset_correctives(&mut self) {
        self.corrective_pose_basis.iter_mut().for_each(|x| *x = 0.0);
        self.corrective_expr_basis.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Replaces the corrective bases, checking their lengths.
    pub fn set_correctives(&mut self, pose: Vec<f64>, expr: Vec<f64>) -> Result<()> {
        if pose.len() != self.pose_basis.len() {
            return Err(Error::dim("corrective_pose_basis", self.pose_basis.len(), pose.len()));
        }
        if expr.len() != self.expr_basis.len() {
            return Err(Error::dim("corrective_expr_basis", self.expr_basis.len(), expr.len()));
        }
        self.corrective_pose_basis = pose;
        self.corrective_expr_basis = expr;
        Ok(())
    }

    /// Mean edge length over faces in the region mask.
    pub fn mean_masked_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (f, &on) in self.faces.iter().zip(&self.region_mask) {
            if !on {
                continue;
            }
            for e in 0..3 {
                let a = self.rest_vertices[f[e] as usize];
                let b = self.rest_vertices[f[(e + 1) % 3] as usize];
                total += (a - b).norm();
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_json()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TemplateFile = serde_json::from_str(text).map_err(|e| Error::TemplateParse(e.to_string()))?;
        file.into_model()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TemplateFile::from_model(self))?)
    }
}

/// Validates the parent array and returns a parent-before-child ordering.
fn joint_order(parents: &[i32]) -> Result<Vec<usize>> {
    let nj = parents.len();
    if parents[0] != -1 {
        return Err(Error::JointHierarchy(format!(
            "joint 0 must be the root (parent -1), found parent {}",
            parents[0]
        )));
    }
    let mut children = vec![Vec::new(); nj];
    for (j, &p) in parents.iter().enumerate().skip(1) {
        if p < 0 {
            return Err(Error::JointHierarchy(format!("joint {j} is a second root")));
        }
        let p = p as usize;
        if p >= nj {
            return Err(Error::JointHierarchy(format!("joint {j} has out-of-range parent {p}")));
        }
        if p == j {
            return Err(Error::JointHierarchy(format!("joint {j} is its own parent")));
        }
        children[p].push(j);
    }
    let mut order = Vec::with_capacity(nj);
    let mut stack = vec![0usize];
    while let Some(j) = stack.pop() {
        order.push(j);
        stack.extend(children[j].iter().rev());
    }
    if order.len() != nj {
        return Err(Error::JointHierarchy(
            "some joints are not reachable from joint 0 (cycle in parent links)".into(),
        ));
    }
    Ok(order)
}

#[derive(Serialize, Deserialize)]
struct JointsSection {
    positions: Vec<f64>,
    parents: Vec<i32>,
}

/// On-disk template document (JSON).
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    version: u32,
    num_vertices: usize,
    num_faces: usize,
    num_joints: usize,
    num_expr: usize,
    vertices: Vec<f64>,
    faces: Vec<u32>,
    joints: JointsSection,
    skin_weights: Vec<f64>,
    expr_basis: Vec<f64>,
    pose_basis: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corrective_expr_basis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corrective_pose_basis: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region_mask: Option<Vec<bool>>,
}

const TEMPLATE_VERSION: u32 = 1;

impl TemplateFile {
    fn into_model(self) -> Result<TemplateModel> {
        if self.version != TEMPLATE_VERSION {
            return Err(Error::TemplateParse(format!(
                "unsupported template version {} (expected {TEMPLATE_VERSION})",
                self.version
            )));
        }
        let checks = [
            ("vertices", self.num_vertices * 3, self.vertices.len()),
            ("faces", self.num_faces * 3, self.faces.len()),
            ("joints.positions", self.num_joints * 3, self.joints.positions.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::dim(what, expected, got));
            }
        }
        let to_vec3 = |d: &[f64]| d.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        TemplateModel::new(
            to_vec3(&self.vertices),
            self.faces.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            to_vec3(&self.joints.positions),
            self.joints.parents,
            self.skin_weights,
            self.pose_basis,
            self.expr_basis,
            self.num_expr,
            self.corrective_pose_basis,
            self.corrective_expr_basis,
            self.region_mask,
        )
    }

    fn from_model(m: &TemplateModel) -> Self {
        let flat = |v: &[Vec3]| v.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let has_corr =
            m.corrective_pose_basis.iter().any(|&x| x != 0.0) || m.corrective_expr_basis.iter().any(|&x| x != 0.0);
        TemplateFile {
            version: TEMPLATE_VERSION,
            num_vertices: m.num_vertices(),
            num_faces: m.num_faces(),
            num_joints: m.num_joints(),
            num_expr: m.num_expr(),
            vertices: flat(&m.rest_vertices),
            faces: m.faces.iter().flatten().copied().collect(),
            joints: JointsSection {
                positions: flat(&m.joint_positions),
                parents: m.joint_parents.clone(),
            },
            skin_weights: m.skin_weights.clone(),
            expr_basis: m.expr_basis.clone(),
            pose_basis: m.pose_basis.clone(),
            corrective_expr_basis: has_corr.then(|| m.corrective_expr_basis.clone()),
            corrective_pose_basis: has_corr.then(|| m.corrective_pose_basis.clone()),
            region_mask: Some(m.region_mask.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One triangle, two joints, one expression component.
    pub(crate) fn tiny_json(weights: [f64; 6]) -> String {
        serde_json::json!({
            "version": 1,
            "num_vertices": 3, "num_faces": 1, "num_joints": 2, "num_expr": 1,
            "vertices": [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            "faces": [0, 1, 2],
            "joints": { "positions": [0.0, 0.0, 0.0, 0.0, 1.0, 0.0], "parents": [-1, 0] },
            "skin_weights": weights,
            "expr_basis": [0.0, 0.0, 0.1, 0.0, 0.0, 0.2, 0.0, 0.0, 0.3],
            "pose_basis": vec![0.0; 3 * 3 * 18],
        })
        .to_string()
    }

    #[test]
    fn missing_correctives_default_to_zero() {
        let m = TemplateModel::from_json(&tiny_json([1.0, 0.0, 0.5, 0.5, 0.0, 1.0])).unwrap();
        assert_eq!(m.corrective_expr_basis, vec![0.0; 9]);
        assert!(m.corrective_pose_basis.iter().all(|&x| x == 0.0));
        assert_eq!(m.corrective_pose_basis.len(), m.pose_basis.len());
        assert_eq!(m.region_mask, vec![true]);
    }

    #[test]
    fn unnormalized_weights_are_rejected() {
        let err = TemplateModel::from_json(&tiny_json([0.25, 0.25, 0.5, 0.5, 0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::SkinWeightSum { vertex: 0, .. }), "{err}");
    }

    #[test]
    fn negative_weights_are_rejected() {
        let err = TemplateModel::from_json(&tiny_json([1.5, -0.5, 0.5, 0.5, 0.0, 1.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::NegativeSkinWeight {
                vertex: 0,
                joint: 1,
                ..
            }
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut v: serde_json::Value = serde_json::from_str(&tiny_json([1.0, 0.0, 0.5, 0.5, 0.0, 1.0])).unwrap();
        v["expr_basis"] = serde_json::json!([0.0, 1.0]);
        let err = TemplateModel::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Dimension { ref what, expected: 9, got: 2 } if what == "expr_basis"));
    }

    #[test]
    fn bad_hierarchy_is_reported() {
        for parents in [[0, 0], [-1, 1], [-1, -1], [-1, 7]] {
            let mut v: serde_json::Value = serde_json::from_str(&tiny_json([1.0, 0.0, 0.5, 0.5, 0.0, 1.0])).unwrap();
            v["joints"]["parents"] = serde_json::json!(parents);
            let err = TemplateModel::from_json(&v.to_string()).unwrap_err();
            assert!(matches!(err, Error::JointHierarchy(_)), "{parents:?}: {err}");
        }
        assert!(joint_order(&[-1, 2, 1]).is_err());
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let err = TemplateModel::from_json("{ not json").unwrap_err();
        assert!(matches!(err, Error::TemplateParse(_)));
        let err = TemplateModel::from_json(r#"{"version": 1}"#).unwrap_err();
        assert!(matches!(err, Error::TemplateParse(_)));
    }

    #[test]
    fn face_index_out_of_range() {
        let mut v: serde_json::Value = serde_json::from_str(&tiny_json([1.0, 0.0, 0.5, 0.5, 0.0, 1.0])).unwrap();
        v["faces"] = serde_json::json!([0, 1, 3]);
        let err = TemplateModel::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::FaceIndex { face: 0, vertex: 3, .. }));
    }

    #[test]
    fn json_round_trip() {
        let mut m = TemplateModel::from_json(&tiny_json([1.0, 0.0, 0.5, 0.5, 0.0, 1.0])).unwrap();
        m.corrective_expr_basis[4] = 0.25;
        let back = TemplateModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
