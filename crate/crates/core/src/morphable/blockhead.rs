//! Procedural "blockhead" template: an ellipsoidal head with a nose, a
//! neck/head/jaw joint chain and four expression shapes (mouth open, smile,
//! brow raise, cheek puff). Used for tests and synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::template::{TemplateModel, POSE_FEATURES_PER_JOINT};
use crate::math::Vec3;

/// Tessellation and seed for [`blockhead`].
#[derive(Clone, Copy, Debug)]
pub struct BlockheadParams {
    pub rings: usize,
    pub segments: usize,
    pub seed: u64,
}

impl Default for BlockheadParams {
    fn default() -> Self {
        BlockheadParams {
            rings: 24,
            segments: 48,
            seed: 0,
        }
    }
}

pub const BLOCKHEAD_JOINTS: usize = 3;
pub const BLOCKHEAD_EXPRESSIONS: usize = 4;

const RADII: [f64; 3] = [0.085, 0.105, 0.095];

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn bump(p: &Vec3, center: &Vec3, width: f64) -> f64 {
    (-(p - center).norm_squared() / (width * width)).exp()
}

/// Generates the synthetic template deterministically from `params.seed`.
pub fn blockhead(params: BlockheadParams) -> TemplateModel {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x6b6c_6f63_6b68_6561);
    let rings = params.rings.max(4);
    let segs = params.segments.max(6);

    // Unit-sphere directions, poles first and last.
    let mut dirs = vec![Vec3::new(0.0, 1.0, 0.0)];
    for r in 1..rings {
        let polar = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segs {
            let az = 2.0 * std::f64::consts::PI * s as f64 / segs as f64;
            dirs.push(Vec3::new(polar.sin() * az.sin(), polar.cos(), polar.sin() * az.cos()));
        }
    }
    dirs.push(Vec3::new(0.0, -1.0, 0.0));
    let nv = dirs.len();

    let blobs: Vec<(Vec3, f64)> = (0..6)
        .map(|_| {
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            (d, rng.random_range(-0.003..0.003))
        })
        .collect();
    let nose_dir = Vec3::new(0.0, -0.05, 1.0).normalize();
    let vertices: Vec<Vec3> = dirs
        .iter()
        .map(|d| {
            let mut radial = 0.018 * bump(d, &nose_dir, 0.22);
            for (c, a) in &blobs {
                radial += a * bump(d, c, 0.6);
            }
            let base = Vec3::new(d.x * RADII[0], d.y * RADII[1], d.z * RADII[2]);
            base + d * radial
        })
        .collect();

    let mut faces = Vec::new();
    let ring_start = |r: usize| 1 + (r - 1) * segs;
    for s in 0..segs {
        let a = ring_start(1) + s;
        let b = ring_start(1) + (s + 1) % segs;
        faces.push([0, a as u32, b as u32]);
    }
    for r in 1..rings - 1 {
        for s in 0..segs {
            let a = ring_start(r) + s;
            let b = ring_start(r) + (s + 1) % segs;
            let c = ring_start(r + 1) + s;
            let d = ring_start(r + 1) + (s + 1) % segs;
            faces.push([a as u32, c as u32, b as u32]);
            faces.push([b as u32, c as u32, d as u32]);
        }
    }
    let last = nv - 1;
    for s in 0..segs {
        let a = ring_start(rings - 1) + s;
        let b = ring_start(rings - 1) + (s + 1) % segs;
        faces.push([last as u32, b as u32, a as u32]);
    }

    // Joints: neck base (root), head pivot, jaw hinge.
    let joints = vec![
        Vec3::new(0.0, -0.13, -0.01),
        Vec3::new(0.0, -0.07, -0.01),
        Vec3::new(0.0, -0.025, 0.0),
    ];
    let parents = vec![-1, 0, 1];
    let nj = joints.len();

    let mut skin_weights = Vec::with_capacity(nv * nj);
    let mut jaw_w = Vec::with_capacity(nv);
    for p in &vertices {
        let root = smoothstep(-0.07, -0.1, p.y);
        let jaw = (1.0 - root) * smoothstep(-0.02, -0.05, p.y) * smoothstep(0.0, 0.04, p.z);
        let head = 1.0 - root - jaw;
        skin_weights.extend_from_slice(&[root, head, jaw]);
        jaw_w.push(jaw);
    }

    let k = BLOCKHEAD_EXPRESSIONS;
    let mut expr_basis = vec![0.0; nv * 3 * k];
    let mouth_l = Vec3::new(0.035, -0.04, 0.08);
    let mouth_r = Vec3::new(-0.035, -0.04, 0.08);
    let brow = Vec3::new(0.0, 0.035, 0.085);
    let cheek_l = Vec3::new(0.055, -0.01, 0.06);
    let cheek_r = Vec3::new(-0.055, -0.01, 0.06);
    for (v, p) in vertices.iter().enumerate() {
        let n = dirs[v];
        let shapes: [Vec3; BLOCKHEAD_EXPRESSIONS] = [
            jaw_w[v] * Vec3::new(0.0, -0.012, 0.003),
            bump(p, &mouth_l, 0.025) * Vec3::new(0.008, 0.005, -0.002)
                + bump(p, &mouth_r, 0.025) * Vec3::new(-0.008, 0.005, -0.002),
            bump(p, &brow, 0.035) * Vec3::new(0.0, 0.009, 0.001),
            (bump(p, &cheek_l, 0.03) + bump(p, &cheek_r, 0.03)) * 0.01 * n,
        ];
        for (e, disp) in shapes.iter().enumerate() {
            for c in 0..3 {
                expr_basis[(v * 3 + c) * k + e] = disp[c];
            }
        }
    }

    // Pose correctives: flexing a joint about x bulges the vertices it drives
    // along the normal, plus a small seeded residual.
    let np = POSE_FEATURES_PER_JOINT * nj;
    let mut pose_basis = vec![0.0; nv * 3 * np];
    for (v, n) in dirs.iter().enumerate() {
        for j in 0..nj {
            let w = skin_weights[v * nj + j];
            // Feature (row 1, col 2) of R(θ_j) − I is −sin θ_x for a pure x rotation.
            let f = j * POSE_FEATURES_PER_JOINT + 5;
            for c in 0..3 {
                pose_basis[(v * 3 + c) * np + f] = -0.01 * w * n[c];
            }
        }
    }
    for x in pose_basis.iter_mut() {
        *x += rng.random_range(-1e-4..1e-4);
    }

    let region_mask = faces
        .iter()
        .map(|f| {
            let c = f.iter().map(|&i| vertices[i as usize]).sum::<Vec3>() / 3.0;
            c.y > -0.085
        })
        .collect();

    TemplateModel::new(
        vertices,
        faces,
        joints,
        parents,
        skin_weights,
        pose_basis,
        expr_basis,
        k,
        None,
        None,
        Some(region_mask),
    )
    .expect("procedural template is valid by construction")
}
