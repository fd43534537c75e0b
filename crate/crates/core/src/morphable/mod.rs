//! Skinned morphable template: blendshapes, learned per-vertex corrections
//! and linear blend skinning with per-vertex rotation extraction.

mod blockhead;
mod skin;
mod template;

pub use blockhead::{blockhead, BlockheadParams, BLOCKHEAD_EXPRESSIONS, BLOCKHEAD_JOINTS};
pub use skin::{
    blendshape_offsets, corrective_offsets, corrective_offsets_vjp, pose_features, skin, skin_backward,
    skin_with_cache, vertex_normals_vjp, DeformedMesh, MeshGrads, MorphGrads, PoseExpr, SkinCache,
};
pub use template::{TemplateModel, POSE_FEATURES_PER_JOINT};

/// Loads and validates a template document.
pub fn load_template(path: impl AsRef<std::path::Path>) -> crate::Result<TemplateModel> {
    TemplateModel::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Quat, Vec3};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn single_joint_model(weights: [f64; 2], rotations_two_joints: bool) -> TemplateModel {
        let nj = if rotations_two_joints { 2 } else { 1 };
        let verts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let sw: Vec<f64> = (0..3).flat_map(|_| weights[..nj].to_vec()).collect();
        TemplateModel::new(
            verts,
            vec![[0, 1, 2]],
            vec![Vec3::zeros(); nj],
            if nj == 1 { vec![-1] } else { vec![-1, 0] },
            sw,
            vec![0.0; 3 * 3 * 9 * nj],
            vec![0.0; 0],
            0,
            None,
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn rest_pose_is_identity() {
        let m = blockhead(BlockheadParams::default());
        let mesh = skin(&m, &PoseExpr::zeros(&m)).unwrap();
        for (a, b) in mesh.vertices.iter().zip(&m.rest_vertices) {
            assert!((a - b).norm() <= 1e-7);
        }
        for q in &mesh.vertex_rotations {
            assert!(q.angle_to(&Quat::IDENTITY) < 1e-12);
        }
        assert!(blendshape_offsets(&m, &PoseExpr::zeros(&m))
            .unwrap()
            .iter()
            .all(|o| o.norm() == 0.0));
    }

    #[test]
    fn single_joint_quarter_turn() {
        let m = single_joint_model([1.0, 0.0], false);
        let mut pe = PoseExpr::zeros(&m);
        pe.joints[0] = [0.0, 0.0, FRAC_PI_2];
        let mesh = skin(&m, &pe).unwrap();
        assert!((mesh.vertices[0] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-6);
        let expected = Quat::from_axis_angle(&[0.0, 0.0, FRAC_PI_2]);
        assert!(mesh.vertex_rotations[0].angle_to(&expected) < 1e-6);
    }

    #[test]
    fn half_weights_average_rotation() {
        let m = single_joint_model([0.5, 0.5], true);
        let mut pe = PoseExpr::zeros(&m);
        pe.joints[1] = [0.0, 0.0, FRAC_PI_2];
        let mesh = skin(&m, &pe).unwrap();
        let expected = Quat::from_axis_angle(&[0.0, 0.0, FRAC_PI_2 / 2.0]);
        assert!(mesh.vertex_rotations[0].angle_to(&expected) < 1e-9);
    }

    #[test]
    fn expression_unit_vector_selects_column() {
        let m = blockhead(BlockheadParams::default());
        let k = m.num_expr();
        for e in 0..k {
            let mut pe = PoseExpr::zeros(&m);
            pe.expr[e] = 1.0;
            let off = blendshape_offsets(&m, &pe).unwrap();
            for (v, o) in off.iter().enumerate() {
                for c in 0..3 {
                    assert_eq!(o[c], m.expr_basis[(v * 3 + c) * k + e]);
                }
            }
        }
    }

    #[test]
    fn two_component_mix_matches_dense_product() {
        let m = blockhead(BlockheadParams::default());
        let (a, b) = (0.7, -1.3);
        let mut pe = PoseExpr::zeros(&m);
        pe.expr[0] = a;
        pe.expr[1] = b;
        let off = blendshape_offsets(&m, &pe).unwrap();
        // Dense matrix-vector product over the full (3V × K) basis.
        let k = m.num_expr();
        let rows = 3 * m.num_vertices();
        let coeffs = [a, b, 0.0, 0.0];
        for r in 0..rows {
            let mut acc = 0.0;
            for c in 0..k {
                acc += m.expr_basis[r * k + c] * coeffs[c];
            }
            assert!((off[r / 3][r % 3] - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn correctives_start_at_zero_and_mirror_basis() {
        let mut m = blockhead(BlockheadParams::default());
        let mut pe = PoseExpr::zeros(&m);
        pe.expr = vec![0.3, -0.5, 1.0, 2.0];
        pe.joints[2] = [0.2, 0.0, 0.0];
        assert!(corrective_offsets(&m, &pe).unwrap().iter().all(|o| o.norm() == 0.0));

        m.corrective_expr_basis = m.expr_basis.clone();
        pe.joints[2] = [0.0; 3];
        let corr = corrective_offsets(&m, &pe).unwrap();
        let base = blendshape_offsets(&m, &pe).unwrap();
        for (a, b) in corr.iter().zip(&base) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = blockhead(BlockheadParams::default());
        let mut pe = PoseExpr::zeros(&m);
        pe.expr.push(0.0);
        assert!(matches!(
            blendshape_offsets(&m, &pe),
            Err(crate::Error::Dimension {
                expected: 4,
                got: 5,
                ..
            })
        ));
        assert!(skin(&m, &pe).is_err());
    }

    fn posed(seed: u64) -> (TemplateModel, PoseExpr) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = blockhead(BlockheadParams {
            rings: 8,
            segments: 12,
            seed,
        });
        for x in m.corrective_pose_basis.iter_mut() {
            *x = rng.random_range(-0.01..0.01);
        }
        for x in m.corrective_expr_basis.iter_mut() {
            *x = rng.random_range(-0.01..0.01);
        }
        let mut pe = PoseExpr::zeros(&m);
        pe.global = [0.1, -0.3, 0.2];
        for j in pe.joints.iter_mut() {
            *j = std::array::from_fn(|_| rng.random_range(-0.4..0.4));
        }
        for e in pe.expr.iter_mut() {
            *e = rng.random_range(-1.5..1.5);
        }
        (m, pe)
    }

    /// Scalar test objective over all mesh outputs with fixed random weights.
    fn objective(mesh: &DeformedMesh, g: &MeshGrads) -> f64 {
        let mut s = 0.0;
        for v in 0..mesh.vertices.len() {
            s += mesh.vertices[v].dot(&g.d_vertices[v]);
            s += mesh.vertex_normals[v].dot(&g.d_normals[v]);
            s += mesh.vertex_rotations[v].dot(&g.d_rotations[v]);
        }
        s
    }

    fn random_grads(nv: usize, seed: u64) -> MeshGrads {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v3 = || {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let d_vertices = (0..nv).map(|_| v3()).collect();
        let d_normals = (0..nv).map(|_| v3()).collect();
        let d_rotations = (0..nv)
            .map(|_| {
                let v = v3();
                Quat([v.x, v.y, v.z, v.x - v.y])
            })
            .collect();
        MeshGrads {
            d_vertices,
            d_normals,
            d_rotations,
        }
    }

    fn check(analytic: f64, fd: f64, what: &str) {
        let scale = analytic.abs().max(fd.abs()).max(1e-3);
        assert!(
            (analytic - fd).abs() / scale <= 1e-4,
            "{what}: analytic {analytic} vs fd {fd}"
        );
    }

    #[test]
    fn skin_gradients_match_finite_differences() {
        let (m, pe) = posed(11);
        let g = random_grads(m.num_vertices(), 12);
        let (mesh, cache) = skin_with_cache(&m, &pe).unwrap();
        let grads = skin_backward(&m, &pe, &mesh, &cache, &g);
        let eval = |m: &TemplateModel, pe: &PoseExpr| objective(&skin(m, pe).unwrap(), &g);
        let h = 1e-6;

        for i in 0..3 {
            let mut p = pe.clone();
            let mut q = pe.clone();
            p.global[i] += h;
            q.global[i] -= h;
            check(grads.d_global[i], (eval(&m, &p) - eval(&m, &q)) / (2.0 * h), "global");
        }
        for j in 0..m.num_joints() {
            for i in 0..3 {
                let mut p = pe.clone();
                let mut q = pe.clone();
                p.joints[j][i] += h;
                q.joints[j][i] -= h;
                check(grads.d_joints[j][i], (eval(&m, &p) - eval(&m, &q)) / (2.0 * h), "joint");
            }
        }
        for e in 0..m.num_expr() {
            let mut p = pe.clone();
            let mut q = pe.clone();
            p.expr[e] += h;
            q.expr[e] -= h;
            check(grads.d_expr[e], (eval(&m, &p) - eval(&m, &q)) / (2.0 * h), "expr");
        }
        for idx in [0usize, 7, 100, 333, m.corrective_pose_basis.len() - 1] {
            let mut p = m.clone();
            let mut q = m.clone();
            p.corrective_pose_basis[idx] += h;
            q.corrective_pose_basis[idx] -= h;
            check(
                grads.d_corrective_pose[idx],
                (eval(&p, &pe) - eval(&q, &pe)) / (2.0 * h),
                "P'",
            );
        }
        for idx in [0usize, 5, 50, m.corrective_expr_basis.len() - 1] {
            let mut p = m.clone();
            let mut q = m.clone();
            p.corrective_expr_basis[idx] += h;
            q.corrective_expr_basis[idx] -= h;
            check(
                grads.d_corrective_expr[idx],
                (eval(&p, &pe) - eval(&q, &pe)) / (2.0 * h),
                "E'",
            );
        }
    }

    #[test]
    fn corrective_vjp_matches_fd() {
        let (m, pe) = posed(3);
        let g = random_grads(m.num_vertices(), 4).d_vertices;
        let (dp, de) = corrective_offsets_vjp(&m, &pe, &g).unwrap();
        let f = |m: &TemplateModel| -> f64 {
            corrective_offsets(m, &pe)
                .unwrap()
                .iter()
                .zip(&g)
                .map(|(a, b)| a.dot(b))
                .sum()
        };
        let h = 1e-6;
        for idx in [3usize, 41, 200] {
            let mut p = m.clone();
            let mut q = m.clone();
            p.corrective_pose_basis[idx] += h;
            q.corrective_pose_basis[idx] -= h;
            check(dp[idx], (f(&p) - f(&q)) / (2.0 * h), "P'");
            let mut p = m.clone();
            let mut q = m.clone();
            p.corrective_expr_basis[idx] += h;
            q.corrective_expr_basis[idx] -= h;
            check(de[idx], (f(&p) - f(&q)) / (2.0 * h), "E'");
        }
    }

    #[test]
    fn vertex_rotation_matches_polar_decomposition() {
        // Quaternion blending against SO(3) projection of the blended matrix.
        // The two schemes agree to first order, so trials use articulation of
        // the size a head rig sees between neighbouring joints.
        let (m, mut pe) = posed(21);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        for j in pe.joints.iter_mut() {
            *j = std::array::from_fn(|_| rand::Rng::random_range(&mut rng, -0.2..0.2));
        }
        let mesh = skin(&m, &pe).unwrap();
        let nj = m.num_joints();
        let mut gq = vec![Quat::IDENTITY; nj];
        let root = Quat::from_axis_angle(&pe.global);
        for j in 0..nj {
            let local = Quat::from_axis_angle(&pe.joints[j]);
            gq[j] = match m.joint_parents[j] {
                -1 => root.mul(&local),
                p => gq[p as usize].mul(&local),
            };
        }
        for v in 0..m.num_vertices() {
            let mut blended = crate::math::Mat3::zeros();
            for j in 0..nj {
                blended += m.skin_weight(v, j) * gq[j].to_mat();
            }
            let svd = blended.svd(true, true);
            let r = svd.u.unwrap() * svd.v_t.unwrap();
            let polar = Quat::from_mat(&r);
            assert!(mesh.vertex_rotations[v].angle_to(&polar) < 1e-3);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn expression_offsets_are_linear(
            a in proptest::collection::vec(-2.0f64..2.0, 4),
            b in proptest::collection::vec(-2.0f64..2.0, 4),
            s in -3.0f64..3.0,
        ) {
            let m = blockhead(BlockheadParams { rings: 8, segments: 12, seed: 0 });
            let mut pe = PoseExpr::zeros(&m);
            pe.joints[2] = [0.15, 0.0, 0.05];
            let mut base = pe.clone();
            base.expr = vec![0.0; 4];
            let off0 = blendshape_offsets(&m, &base).unwrap();
            let eval = |e: Vec<f64>| {
                let mut p = pe.clone();
                p.expr = e;
                blendshape_offsets(&m, &p).unwrap()
            };
            let fa = eval(a.clone());
            let fb = eval(b.clone());
            let fab = eval(a.iter().zip(&b).map(|(x, y)| x + y).collect());
            let fsa = eval(a.iter().map(|x| s * x).collect());
            for v in 0..m.num_vertices() {
                let add = fa[v] + fb[v] - off0[v];
                prop_assert!((fab[v] - add).norm() < 1e-12);
                let hom = off0[v] + s * (fa[v] - off0[v]);
                prop_assert!((fsa[v] - hom).norm() < 1e-12);
            }
        }

        #[test]
        fn vertex_rotations_are_valid(seed in 0u64..1000) {
            let (m, pe) = posed(seed);
            let mesh = skin(&m, &pe).unwrap();
            for (q, n) in mesh.vertex_rotations.iter().zip(&mesh.vertex_normals) {
                prop_assert!((q.norm() - 1.0).abs() < 1e-6);
                let r = q.to_mat();
                prop_assert!((r.transpose() * r - crate::math::Mat3::identity()).norm() < 1e-5);
                prop_assert!((n.norm() - 1.0).abs() < 1e-6);
            }
            prop_assert!(mesh.face_areas.iter().all(|&a| a >= 0.0));
        }

        #[test]
        fn global_rotation_is_rigid(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0) {
            let (m, mut pe) = posed(9);
            pe.global = [0.0; 3];
            let base = skin(&m, &pe).unwrap();
            let rg = Quat::from_axis_angle(&[ax, ay, az]);
            pe.global = [ax, ay, az];
            let rotated = skin(&m, &pe).unwrap();
            let root = m.joint_positions[0];
            for (a, b) in base.vertices.iter().zip(&rotated.vertices) {
                let expected = rg.rotate(&(a - root)) + root;
                prop_assert!((expected - b).norm() < 1e-5);
            }
        }
    }
}
