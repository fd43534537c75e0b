//! Reference implementations and check suites shared by the test targets.
//!
//! Nothing here is used by the library proper; the brute-force compositor
//! deliberately shares no code with the tile rasterizer beyond the public
//! kernel definitions' documented formulas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{Quat, Vec3};
use crate::morphable::{
    blockhead, skin, skin_backward, skin_with_cache, BlockheadParams, MeshGrads, PoseExpr, TemplateModel,
};
use crate::psm::{
    build_cloud, deform_backward, deform_samples, DeformedSample, PsmCloud, SamplingConfig, SurfaceSample,
};
use crate::splat::sh::sh_eval_raw;
use crate::splat::sh_rotate;
use crate::splat::{
    rasterize, render_gaussians, render_gaussians_backward, render_points, render_points_backward, CameraModel,
    GaussianPrimitive, GaussianSet, Kernel, RasterConfig, ShCoeffs, Splat, MAX_SH_COEFFS, MAX_SH_DEGREE,
};

/// Per-pixel global sort of every primitive by `(depth, id)` followed by
/// front-to-back compositing. Returns the image and each primitive's maximum
/// compositing weight.
pub fn brute_force_composite(
    splats: &[Option<Splat>],
    width: u32,
    height: u32,
    background: [f64; 3],
    cfg: &RasterConfig,
) -> (Vec<[f64; 3]>, Vec<f64>) {
    let mut order: Vec<usize> = (0..splats.len()).filter(|&i| splats[i].is_some()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (splats[a].unwrap(), splats[b].unwrap());
        sa.depth.partial_cmp(&sb.depth).unwrap().then(a.cmp(&b))
    });
    let mut image = Vec::with_capacity((width * height) as usize);
    let mut max_w = vec![0.0f64; splats.len()];
    for py in 0..height {
        for px in 0..width {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut t = 1.0;
            let mut c = [0.0; 3];
            for &i in &order {
                let s = splats[i].unwrap();
                let (dx, dy) = (x - s.mean[0], y - s.mean[1]);
                if dx.abs() > s.extent || dy.abs() > s.extent {
                    continue;
                }
                let a = match s.kernel {
                    Kernel::Point { radius } => {
                        let d2 = dx * dx + dy * dy;
                        if d2.sqrt() >= radius {
                            continue;
                        }
                        (s.opacity * (1.0 - d2 / (radius * radius))).clamp(0.0, cfg.alpha_max)
                    }
                    Kernel::Gaussian { conic } => {
                        let q = conic[0] * dx * dx + 2.0 * conic[1] * dx * dy + conic[2] * dy * dy;
                        let a = (s.opacity * (-0.5 * q).exp()).min(cfg.alpha_max);
                        if a < cfg.alpha_min {
                            continue;
                        }
                        a
                    }
                };
                if a <= 0.0 {
                    continue;
                }
                let w = a * t;
                for k in 0..3 {
                    c[k] += w * s.color[k];
                }
                max_w[i] = max_w[i].max(w);
                t *= 1.0 - a;
                if t < cfg.min_transmittance {
                    break;
                }
            }
            image.push(std::array::from_fn(|k| c[k] + t * background[k]));
        }
    }
    (image, max_w)
}

/// Random screen-space scene. `kind`: 0 points, 1 Gaussians, 2 mixed.
pub fn random_scene(rng: &mut ChaCha8Rng, count: usize, width: u32, height: u32, kind: u8) -> Vec<Option<Splat>> {
    (0..count)
        .map(|i| {
            if rng.random_bool(0.05) {
                return None;
            }
            let mean = [
                rng.random_range(-4.0..width as f64 + 4.0),
                rng.random_range(-4.0..height as f64 + 4.0),
            ];
            // A few exact depth ties exercise the id tie-break.
            let depth = if i > 0 && rng.random_bool(0.1) {
                1.0
            } else {
                rng.random_range(0.5..3.0)
            };
            let opacity = rng.random_range(0.05..1.0);
            let color = std::array::from_fn(|_| rng.random_range(0.0..1.0));
            let gaussian = match kind {
                0 => false,
                1 => true,
                _ => rng.random_bool(0.5),
            };
            let (kernel, extent) = if gaussian {
                let sx: f64 = rng.random_range(0.6..6.0);
                let sy: f64 = rng.random_range(0.6..6.0);
                let th: f64 = rng.random_range(0.0..std::f64::consts::PI);
                let (c, s) = (th.cos(), th.sin());
                let a = c * c * sx * sx + s * s * sy * sy + 0.3;
                let b = c * s * (sx * sx - sy * sy);
                let d = s * s * sx * sx + c * c * sy * sy + 0.3;
                let det = a * d - b * b;
                let mid = 0.5 * (a + d);
                let lmax = mid + (mid * mid - det).max(0.0).sqrt();
                (
                    Kernel::Gaussian {
                        conic: [d / det, -b / det, a / det],
                    },
                    3.0 * lmax.sqrt(),
                )
            } else {
                let r = rng.random_range(0.5..8.0);
                (Kernel::Point { radius: r }, r)
            };
            Some(Splat {
                mean,
                depth,
                extent,
                opacity,
                color,
                kernel,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct CompositingReport {
    pub scenes: usize,
    pub max_color_deviation: f64,
    pub max_weight_deviation: f64,
}

/// Tile rasterizer against [`brute_force_composite`] on random scenes of up
/// to 64 primitives at 32×32.
pub fn compositing_suite(scenes: usize, seed: u64) -> CompositingReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RasterConfig::default();
    let mut report = CompositingReport {
        scenes,
        max_color_deviation: 0.0,
        max_weight_deviation: 0.0,
    };
    for k in 0..scenes {
        let count = rng.random_range(0..=64);
        let splats = random_scene(&mut rng, count, 32, 32, (k % 3) as u8);
        let bg = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let tiled = rasterize(&splats, 32, 32, bg, &cfg).expect("valid scene");
        let (img, w) = brute_force_composite(&splats, 32, 32, bg, &cfg);
        for (a, b) in tiled.image.iter().zip(&img) {
            for c in 0..3 {
                report.max_color_deviation = report.max_color_deviation.max((a[c] - b[c]).abs());
            }
        }
        for (a, b) in tiled.max_weight.iter().zip(&w) {
            report.max_weight_deviation = report.max_weight_deviation.max((a - b).abs());
        }
    }
    report
}

/// Raster settings without the support cutoffs that make the image a
/// discontinuous function of the parameters, for finite-difference checks.
pub fn smooth_config() -> RasterConfig {
    RasterConfig {
        alpha_min: 0.0,
        radius_sigma: 8.0,
        ..RasterConfig::default()
    }
}

/// `|a − b|` relative to the larger magnitude, with an absolute floor.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central difference with one Richardson step, accurate to O(h⁴).
fn central<F: FnMut(f64) -> f64>(mut f: F, h: f64) -> f64 {
    let mut d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let (coarse, fine) = (d(h), d(0.5 * h));
    (4.0 * fine - coarse) / 3.0
}

#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub class: &'static str,
    pub checked: usize,
    pub max_rel_err: f64,
    /// Largest gradient magnitude in the class.
    pub largest: f64,
}

/// Small posed scene: a coarse template with nonzero correctives, three
/// bound Gaussians and a 16×16 camera.
pub struct GradientScene {
    pub model: TemplateModel,
    pub pe: PoseExpr,
    pub cam: CameraModel,
    pub gaussians: GaussianSet,
    pub points: PsmCloud,
    pub weights: Vec<[f64; 3]>,
    pub background: [f64; 3],
}

impl GradientScene {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = blockhead(BlockheadParams {
            rings: 8,
            segments: 12,
            seed,
        });
        for x in model.corrective_pose_basis.iter_mut() {
            *x = rng.random_range(-0.005..0.005);
        }
        for x in model.corrective_expr_basis.iter_mut() {
            *x = rng.random_range(-0.005..0.005);
        }
        let mut pe = PoseExpr::zeros(&model);
        pe.global = [0.05, 0.2, -0.03];
        pe.joints[1] = [0.1, -0.05, 0.02];
        pe.joints[2] = [0.15, 0.0, 0.0];
        for e in pe.expr.iter_mut() {
            *e = rng.random_range(-1.0..1.0);
        }
        let cam = CameraModel::orbit(&Vec3::new(0.0, -0.01, 0.0), 0.15, 0.05, 0.45, 40.0, 16, 16);

        let view_axis = cam.rotation().transpose() * Vec3::z();
        let front: Vec<u32> = {
            let mesh = skin(&model, &pe).expect("valid pose");
            (0..model.num_faces() as u32)
                .filter(|&f| model.region_mask[f as usize] && mesh.face_normals[f as usize].dot(&view_axis) < -0.3)
                .collect()
        };
        let sample = |rng: &mut ChaCha8Rng| {
            let r1: f64 = rng.random_range(0.1..0.9);
            let r2: f64 = rng.random_range(0.1..0.9);
            let s = r1.sqrt();
            SurfaceSample {
                face_index: front[rng.random_range(0..front.len())],
                bary: [1.0 - s, s * (1.0 - r2), s * r2],
                offset: rng.random_range(0.0..0.01),
                opacity_raw: rng.random_range(-0.8..1.2),
                color: std::array::from_fn(|_| rng.random_range(0.1..0.9)),
            }
        };
        let prims = (0..3)
            .map(|_| {
                let base = sample(&mut rng);
                let mut sh = [[0.0; 3]; 16];
                for k in 0..16 {
                    sh[k] = std::array::from_fn(|_| rng.random_range(-0.15..0.15));
                }
                GaussianPrimitive {
                    base,
                    local_q: Quat(std::array::from_fn(|_| rng.random_range(-1.0..1.0))),
                    log_scale: std::array::from_fn(|_| rng.random_range(-4.2..-3.3)),
                    sh,
                }
            })
            .collect();
        let points = PsmCloud {
            samples: (0..6).map(|_| sample(&mut rng)).collect(),
            l_max: 0.01,
            radius: 0.012,
            seed,
        };
        let weights = (0..256)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        GradientScene {
            model,
            pe,
            cam,
            gaussians: GaussianSet { prims, sh_degree: 3 },
            points,
            weights,
            background: [0.9, 0.8, 0.7],
        }
    }

    fn objective(&self, image: &[[f64; 3]]) -> f64 {
        image
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p[0] * w[0] + p[1] * w[1] + p[2] * w[2])
            .sum()
    }

    fn deformed(&self, model: &TemplateModel, pe: &PoseExpr, samples: &[SurfaceSample]) -> Vec<DeformedSample> {
        deform_samples(&skin(model, pe).expect("valid"), samples).expect("valid")
    }

    pub fn gaussian_loss(&self, model: &TemplateModel, pe: &PoseExpr, set: &GaussianSet, cfg: &RasterConfig) -> f64 {
        let d = self.deformed(model, pe, &set.samples());
        self.gaussian_loss_deformed(set, &d, cfg)
    }

    fn gaussian_loss_deformed(&self, set: &GaussianSet, d: &[DeformedSample], cfg: &RasterConfig) -> f64 {
        let out = render_gaussians(set, d, &self.cam, self.background, cfg).expect("render");
        self.objective(&out.image)
    }

    pub fn point_loss(&self, model: &TemplateModel, pe: &PoseExpr, cloud: &PsmCloud, cfg: &RasterConfig) -> f64 {
        let d = self.deformed(model, pe, &cloud.samples);
        let out = render_points(cloud, &d, &self.cam, self.background, cfg).expect("render");
        self.objective(&out.image)
    }
}

struct Tracker {
    class: &'static str,
    pairs: Vec<(f64, f64)>,
}

impl Tracker {
    fn new(class: &'static str) -> Self {
        Tracker {
            class,
            pairs: Vec::new(),
        }
    }

    fn push(&mut self, analytic: f64, numeric: f64) {
        self.pairs.push((analytic, numeric));
    }

    /// Errors are relative, floored at 1e-4 of the class's largest gradient
    /// so that entries many orders below the rest are compared absolutely.
    fn finish(self) -> GradientCheck {
        let scale = self.pairs.iter().fold(0.0f64, |m, (a, n)| m.max(a.abs()).max(n.abs()));
        let floor = (1e-4 * scale).max(1e-12);
        GradientCheck {
            class: self.class,
            checked: self.pairs.len(),
            max_rel_err: self
                .pairs
                .iter()
                .map(|&(a, n)| rel_err(a, n, floor))
                .fold(0.0, f64::max),
            largest: scale,
        }
    }
}

/// Analytic gradients against central differences for every learnable
/// parameter class, on [`GradientScene`] with the [`smooth_config`] raster.
pub fn gradient_suite(seed: u64) -> Vec<GradientCheck> {
    let sc = GradientScene::new(seed);
    let cfg = smooth_config();
    let (model, pe) = (&sc.model, &sc.pe);
    let mut checks = Vec::new();

    // Gaussians: analytic chain through the renderer, binding and skinning.
    let (mesh, cache) = skin_with_cache(model, pe).expect("valid");
    let samples = sc.gaussians.samples();
    let deformed = deform_samples(&mesh, &samples).expect("valid");
    let out = render_gaussians(&sc.gaussians, &deformed, &sc.cam, sc.background, &cfg).expect("render");
    let gg = render_gaussians_backward(&out, &sc.gaussians, &deformed, &sc.cam, &sc.weights).expect("backward");
    let mut mg = MeshGrads::zeros(model.num_vertices());
    deform_backward(&mesh, &samples, &gg.position, &gg.bind_q, &mut mg);
    let morph = skin_backward(model, pe, &mesh, &cache, &mg);

    let set = &sc.gaussians;
    let h_raw = 1e-3;
    let h_pos = 1e-5;

    let mut t = Tracker::new("gaussian mean");
    for i in 0..set.len() {
        for a in 0..3 {
            let fd = central(
                |h| {
                    let mut d = deformed.clone();
                    d[i].position[a] += h;
                    sc.gaussian_loss_deformed(set, &d, &cfg)
                },
                h_pos,
            );
            t.push(gg.position[i][a], fd);
        }
    }
    checks.push(t.finish());

    let mut t = Tracker::new("expression via binding");
    for e in 0..pe.expr.len() {
        let fd = central(
            |h| {
                let mut p = pe.clone();
                p.expr[e] += h;
                sc.gaussian_loss(model, &p, set, &cfg)
            },
            h_raw,
        );
        t.push(morph.d_expr[e], fd);
    }
    for j in 0..3 {
        let fd = central(
            |h| {
                let mut p = pe.clone();
                p.joints[2][j] += h;
                sc.gaussian_loss(model, &p, set, &cfg)
            },
            h_raw,
        );
        t.push(morph.d_joints[2][j], fd);
    }
    checks.push(t.finish());

    let fd_set = |f: &dyn Fn(&mut GaussianSet, f64)| {
        central(
            |h| {
                let mut s = set.clone();
                f(&mut s, h);
                sc.gaussian_loss_deformed(&s, &deformed, &cfg)
            },
            h_raw,
        )
    };

    let mut t = Tracker::new("rotation q");
    for i in 0..set.len() {
        for k in 0..4 {
            t.push(gg.local_q[i].0[k], fd_set(&|s, h| s.prims[i].local_q.0[k] += h));
        }
    }
    checks.push(t.finish());

    let mut t = Tracker::new("log_scale");
    for i in 0..set.len() {
        for k in 0..3 {
            t.push(gg.log_scale[i][k], fd_set(&|s, h| s.prims[i].log_scale[k] += h));
        }
    }
    checks.push(t.finish());

    let mut t = Tracker::new("opacity_raw");
    for i in 0..set.len() {
        t.push(gg.opacity_raw[i], fd_set(&|s, h| s.prims[i].base.opacity_raw += h));
    }
    // Point opacities below.
    let (pmesh, pcache) = (mesh.clone(), &cache);
    let pdeformed = deform_samples(&pmesh, &sc.points.samples).expect("valid");
    let pout = render_points(&sc.points, &pdeformed, &sc.cam, sc.background, &cfg).expect("render");
    let pg = render_points_backward(&pout, &sc.points, &pdeformed, &sc.cam, &sc.weights).expect("backward");
    let point_loss_d = |cloud: &PsmCloud, d: &[DeformedSample]| {
        let o = render_points(cloud, d, &sc.cam, sc.background, &cfg).expect("render");
        sc.objective(&o.image)
    };
    for i in 0..sc.points.len() {
        let fd = central(
            |h| {
                let mut c = sc.points.clone();
                c.samples[i].opacity_raw += h;
                point_loss_d(&c, &pdeformed)
            },
            h_raw,
        );
        t.push(pg.opacity_raw[i], fd);
    }
    checks.push(t.finish());

    let mut t = Tracker::new("point color");
    for i in 0..sc.points.len() {
        for c in 0..3 {
            let fd = central(
                |h| {
                    let mut cl = sc.points.clone();
                    cl.samples[i].color[c] += h;
                    point_loss_d(&cl, &pdeformed)
                },
                h_raw,
            );
            t.push(pg.color[i][c], fd);
        }
    }
    checks.push(t.finish());

    let mut t = Tracker::new("point mean");
    for i in 0..sc.points.len() {
        for a in 0..3 {
            let fd = central(
                |h| {
                    let mut d = pdeformed.clone();
                    d[i].position[a] += h;
                    point_loss_d(&sc.points, &d)
                },
                h_pos,
            );
            t.push(pg.position[i][a], fd);
        }
    }
    checks.push(t.finish());

    let mut t = Tracker::new("SH coefficients");
    for i in 0..set.len() {
        for k in 0..16 {
            for c in 0..3 {
                t.push(gg.sh[i][k][c], fd_set(&|s, h| s.prims[i].sh[k][c] += h));
            }
        }
    }
    checks.push(t.finish());

    // Corrective bases: entries on the vertices that carry primitives, through
    // both the Gaussian and the point pipelines.
    let mut pmg = MeshGrads::zeros(model.num_vertices());
    deform_backward(
        &pmesh,
        &sc.points.samples,
        &pg.position,
        &vec![Quat::ZERO; sc.points.len()],
        &mut pmg,
    );
    let pmorph = skin_backward(model, pe, &pmesh, pcache, &pmg);
    let k = model.num_expr();
    let np = model.num_pose_features();
    let mut t = Tracker::new("corrective bases");
    let mut verts: Vec<usize> = set
        .prims
        .iter()
        .map(|g| mesh.faces[g.base.face_index as usize][0] as usize)
        .collect();
    verts.push(mesh.faces[sc.points.samples[0].face_index as usize][1] as usize);
    for (n, &v) in verts.iter().enumerate() {
        for c in 0..3 {
            let ei = (v * 3 + c) * k + (n % k);
            let pi = (v * 3 + c) * np + 9 + 5;
            let use_points = n == verts.len() - 1;
            let loss = |m: &TemplateModel| {
                if use_points {
                    sc.point_loss(m, pe, &sc.points, &cfg)
                } else {
                    sc.gaussian_loss(m, pe, set, &cfg)
                }
            };
            let (de, dp) = if use_points {
                (pmorph.d_corrective_expr[ei], pmorph.d_corrective_pose[pi])
            } else {
                (morph.d_corrective_expr[ei], morph.d_corrective_pose[pi])
            };
            let fd = central(
                |h| {
                    let mut m = model.clone();
                    m.corrective_expr_basis[ei] += h;
                    loss(&m)
                },
                h_pos,
            );
            t.push(de, fd);
            let fd = central(
                |h| {
                    let mut m = model.clone();
                    m.corrective_pose_basis[pi] += h;
                    loss(&m)
                },
                h_pos,
            );
            t.push(dp, fd);
        }
    }
    checks.push(t.finish());
    checks
}

/// Uniform random unit vector.
pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KinematicsReport {
    /// Largest vertex displacement at the zero pose.
    pub rest_pose_error: f64,
    /// Position and rotation error of a fully weighted vertex under a 90°
    /// turn about +z.
    pub quarter_turn_error: f64,
    /// Largest deviation between evaluating rotated coefficients and
    /// evaluating the originals along the inversely rotated direction.
    pub sh_rotation_error: f64,
    pub sh_trials: usize,
}

/// Closed-form skinning cases and SH rotation equivalence, `trials` random
/// rotations per degree 0 to 3.
pub fn kinematics_suite(trials: usize, seed: u64) -> KinematicsReport {
    let m = blockhead(BlockheadParams::default());
    let mesh = skin(&m, &PoseExpr::zeros(&m)).expect("valid pose");
    let rest_pose_error = mesh
        .vertices
        .iter()
        .zip(&m.rest_vertices)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let tri = TemplateModel::new(
        vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 1, 2]],
        vec![Vec3::zeros()],
        vec![-1],
        vec![1.0; 3],
        vec![0.0; 3 * 3 * 9],
        vec![],
        0,
        None,
        None,
        None,
    )
    .expect("valid single-joint model");
    let mut pe = PoseExpr::zeros(&tri);
    pe.joints[0] = [0.0, 0.0, std::f64::consts::FRAC_PI_2];
    let turned = skin(&tri, &pe).expect("valid pose");
    let expected = Quat::from_axis_angle(&[0.0, 0.0, std::f64::consts::FRAC_PI_2]);
    let quarter_turn_error = [
        (turned.vertices[0] - Vec3::new(0.0, 1.0, 0.0)).norm(),
        (turned.vertices[1] - Vec3::new(-1.0, 0.0, 0.0)).norm(),
        (turned.vertices[2] - Vec3::new(0.0, 0.0, 1.0)).norm(),
        turned.vertex_rotations[0].angle_to(&expected),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sh_rotation_error: f64 = 0.0;
    for degree in 0..=MAX_SH_DEGREE {
        for _ in 0..trials {
            let r = Quat(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                .normalize()
                .to_mat();
            let mut c: ShCoeffs = [[0.0; 3]; MAX_SH_COEFFS];
            for k in 0..(degree + 1) * (degree + 1) {
                c[k] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            }
            let rc = sh_rotate(&c, degree, &r).expect("proper rotation");
            for _ in 0..20 {
                let d = random_unit(&mut rng);
                // Raw (unclamped) evaluation so the comparison is linear.
                let lhs = sh_eval_raw(&rc, degree, &d);
                let rhs = sh_eval_raw(&c, degree, &(r.transpose() * d));
                for ch in 0..3 {
                    sh_rotation_error = sh_rotation_error.max((lhs[ch] - rhs[ch]).abs());
                }
            }
        }
    }
    KinematicsReport {
        rest_pose_error,
        quarter_turn_error,
        sh_rotation_error,
        sh_trials: trials * (MAX_SH_DEGREE + 1),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OffsetReport {
    pub draws: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Off-surface offsets drawn at default settings on the default template.
pub fn offset_suite(draws: usize, seed: u64) -> crate::Result<OffsetReport> {
    let m = blockhead(BlockheadParams::default());
    let cfg = SamplingConfig {
        num_samples: draws,
        ..SamplingConfig::default()
    };
    let cloud = build_cloud(&m, &cfg, seed)?;
    let off: Vec<f64> = cloud.samples[draws..].iter().map(|s| s.offset).collect();
    Ok(OffsetReport {
        draws: off.len(),
        min: off.iter().copied().fold(f64::INFINITY, f64::min),
        max: off.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: off.iter().sum::<f64>() / off.len() as f64,
    })
}
