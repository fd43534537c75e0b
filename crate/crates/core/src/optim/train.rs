//! The two fitting stages. The shape stage renders the point cloud with the
//! disc kernel and trains point color, opacity and the corrective bases; the
//! appearance stage binds one Gaussian to every surviving sample and trains
//! rotation, scale, opacity and SH color.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{
    loss_perceptual, loss_perceptual_grad, loss_rgb, loss_rgb_grad, loss_scaling, loss_scaling_grad, total_loss,
    FeatureExtractor, LossParts,
};
use super::metrics::{psnr, silhouette_iou, ssim};
use crate::error::{Error, Result};
use crate::frame::{FrameRecord, Image};
use crate::math::{Quat, Vec3};
use crate::morphable::{skin, skin_backward, skin_with_cache, MeshGrads, PoseExpr, TemplateModel};
use crate::psm::{deform_backward, deform_samples, prune, PsmCloud, DEFAULT_PRUNE_THRESHOLD};
use crate::splat::sh::{num_coeffs, SH_C0, SH_DC_OFFSET};
use crate::splat::{
    render_gaussians, render_gaussians_backward, render_points, render_points_backward, CameraModel, GaussianPrimitive,
    GaussianSet, RasterConfig, RenderOutput,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningRates {
    pub color: f64,
    pub sh: f64,
    pub opacity: f64,
    pub rotation: f64,
    pub log_scale: f64,
    pub corrective: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            color: 2.5e-3,
            sh: 2.5e-3,
            opacity: 5e-2,
            rotation: 1e-3,
            log_scale: 5e-3,
            corrective: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub lambda_perceptual: f64,
    pub lambda_scaling: f64,
    pub lr: LearningRates,
    pub shape_epochs: usize,
    pub appearance_epochs: usize,
    pub prune_threshold: f64,
    /// Frames per optimizer step; gradients are averaged over the batch.
    pub batch_size: usize,
    pub seed: u64,
    pub freeze_corrective_in_stage2: bool,
    pub enable_perceptual: bool,
    /// Train the corrective bases in the shape stage. Off keeps them at
    /// whatever the template carries (zero for a fresh template).
    pub enable_corrective: bool,
    pub sh_degree: usize,
    pub background: [f64; 3],
    pub raster: RasterConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lambda_perceptual: 0.1,
            lambda_scaling: 0.1,
            lr: LearningRates::default(),
            shape_epochs: 2,
            appearance_epochs: 10,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            batch_size: 1,
            seed: 0,
            freeze_corrective_in_stage2: true,
            enable_perceptual: true,
            enable_corrective: true,
            sh_degree: 3,
            background: [1.0; 3],
            raster: RasterConfig::default(),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.lambda_perceptual >= 0.0) || !(self.lambda_scaling >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if self.shape_epochs == 0 || self.appearance_epochs == 0 {
            return bad("epoch counts must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.sh_degree > 3 {
            return bad(format!("sh_degree {} exceeds 3", self.sh_degree));
        }
        let lr = &self.lr;
        for (name, v) in [
            ("color", lr.color),
            ("sh", lr.sh),
            ("opacity", lr.opacity),
            ("rotation", lr.rotation),
            ("log_scale", lr.log_scale),
            ("corrective", lr.corrective),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("learning rate {name} must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    fn lambda_perceptual_eff(&self) -> f64 {
        if self.enable_perceptual {
            self.lambda_perceptual
        } else {
            0.0
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub stage: String,
    pub epoch: usize,
    pub iteration: usize,
    pub frame: usize,
    pub loss: f64,
    pub rgb: f64,
    pub perceptual: f64,
    pub scaling: f64,
    pub psnr: f64,
}

/// Splits frame indices into (train, holdout); every `every`-th frame is
/// held out. `every == 0` holds out nothing.
pub fn holdout_split(count: usize, every: usize) -> (Vec<usize>, Vec<usize>) {
    (0..count).partition(|&i| every == 0 || (i + 1) % every != 0)
}

struct Group {
    lr: f64,
    state: AdamState,
    grad: Vec<f64>,
}

impl Group {
    fn new(n: usize, lr: f64) -> Self {
        Group {
            lr,
            state: AdamState::new(n),
            grad: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], frames: usize, adam: &AdamConfig) {
        let inv = 1.0 / frames as f64;
        for g in self.grad.iter_mut() {
            *g *= inv;
        }
        adam_step(params, &self.grad, &mut self.state, self.lr, adam);
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

fn add_into(dst: &mut [f64], src: impl IntoIterator<Item = f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn check_frames(frames: &[FrameRecord], model: &TemplateModel) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::Dataset("no training frames".into()));
    }
    for (i, f) in frames.iter().enumerate() {
        f.validate().map_err(|e| Error::Frame {
            index: i,
            msg: e.to_string(),
        })?;
        f.pe.validate(model).map_err(|e| Error::Frame {
            index: i,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

fn non_finite(stage: &str, epoch: usize, frame: usize, parts: &LossParts) -> Error {
    Error::Numerical(format!(
        "non-finite loss in {stage} stage (epoch {epoch}, frame {frame}): rgb {} perceptual {} scaling {}",
        parts.rgb, parts.perceptual, parts.scaling
    ))
}

/// Pixel-space losses and the image gradient of `rgb + λ₁·perceptual`.
fn image_losses(
    rendered: &Image,
    target: &Image,
    cfg: &OptimConfig,
    extractor: &dyn FeatureExtractor,
) -> (LossParts, Vec<[f64; 3]>) {
    let mut parts = LossParts {
        rgb: loss_rgb(rendered, target),
        ..Default::default()
    };
    let mut d_image = vec![[0.0; 3]; rendered.len()];
    loss_rgb_grad(rendered, target, 1.0, &mut d_image);
    if cfg.enable_perceptual {
        parts.perceptual = loss_perceptual(rendered, target, extractor);
        loss_perceptual_grad(rendered, target, extractor, cfg.lambda_perceptual, &mut d_image);
    }
    (parts, d_image)
}

fn output_image(out: &RenderOutput) -> Image {
    Image {
        width: out.width,
        height: out.height,
        data: out.image.clone(),
    }
}

/// Result of [`fit_shape`].
#[derive(Clone, Debug)]
pub struct ShapeFit {
    /// Trained and pruned cloud.
    pub cloud: PsmCloud,
    /// Template carrying the trained corrective bases.
    pub model: TemplateModel,
    /// Maximum compositing weight of every pre-pruning sample over the final epoch.
    pub visibility: Vec<f64>,
    pub stats: Vec<StatRecord>,
}

/// Shape stage: analysis-by-synthesis with the point kernel.
pub fn fit_shape(
    frames: &[FrameRecord],
    model: &TemplateModel,
    cloud: &PsmCloud,
    cfg: &OptimConfig,
    extractor: &dyn FeatureExtractor,
) -> Result<ShapeFit> {
    cfg.validate()?;
    check_frames(frames, model)?;
    if cloud.is_empty() {
        return Err(Error::InvalidInput("point cloud has no samples".into()));
    }
    let mut model = model.clone();
    let mut cloud = cloud.clone();
    let n = cloud.len();
    let adam = AdamConfig::default();

    let mut color: Vec<f64> = cloud.samples.iter().flat_map(|s| s.color).collect();
    let mut opacity: Vec<f64> = cloud.samples.iter().map(|s| s.opacity_raw).collect();
    let mut g_color = Group::new(n * 3, cfg.lr.color);
    let mut g_opacity = Group::new(n, cfg.lr.opacity);
    let mut g_cp = Group::new(model.corrective_pose_basis.len(), cfg.lr.corrective);
    let mut g_ce = Group::new(model.corrective_expr_basis.len(), cfg.lr.corrective);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut visibility = vec![0.0; n];
    let mut stats = Vec::new();
    let mut iteration = 0;
    let zero_rot = vec![Quat::ZERO; n];

    for epoch in 0..cfg.shape_epochs {
        order.shuffle(&mut rng);
        let last_epoch = epoch + 1 == cfg.shape_epochs;
        for batch in order.chunks(cfg.batch_size) {
            for &fi in batch {
                let frame = &frames[fi];
                let (mesh, cache) = skin_with_cache(&model, &frame.pe)?;
                let deformed = deform_samples(&mesh, &cloud.samples)?;
                let out = render_points(&cloud, &deformed, &frame.cam, cfg.background, &cfg.raster)?;
                let rendered = output_image(&out);
                let (parts, d_image) = image_losses(&rendered, &frame.image, cfg, extractor);
                let loss = total_loss(&parts, cfg.lambda_perceptual_eff(), 0.0);
                if !loss.is_finite() {
                    return Err(non_finite("shape", epoch, fi, &parts));
                }
                if last_epoch {
                    for (v, w) in visibility.iter_mut().zip(&out.per_primitive_max_weight) {
                        *v = f64::max(*v, *w);
                    }
                }
                let pg = render_points_backward(&out, &cloud, &deformed, &frame.cam, &d_image)?;
                add_into(&mut g_color.grad, pg.color.iter().flatten().copied());
                add_into(&mut g_opacity.grad, pg.opacity_raw.iter().copied());
                if cfg.enable_corrective {
                    let mut mg = MeshGrads::zeros(model.num_vertices());
                    deform_backward(&mesh, &cloud.samples, &pg.position, &zero_rot, &mut mg);
                    let morph = skin_backward(&model, &frame.pe, &mesh, &cache, &mg);
                    add_into(&mut g_cp.grad, morph.d_corrective_pose);
                    add_into(&mut g_ce.grad, morph.d_corrective_expr);
                }
                stats.push(StatRecord {
                    stage: "shape".into(),
                    epoch,
                    iteration,
                    frame: fi,
                    loss,
                    rgb: parts.rgb,
                    perceptual: parts.perceptual,
                    scaling: 0.0,
                    psnr: psnr(&rendered, &frame.image)?,
                });
            }
            let count = batch.len();
            g_color.step(&mut color, count, &adam);
            g_opacity.step(&mut opacity, count, &adam);
            if cfg.enable_corrective {
                g_cp.step(&mut model.corrective_pose_basis, count, &adam);
                g_ce.step(&mut model.corrective_expr_basis, count, &adam);
            }
            for (i, s) in cloud.samples.iter_mut().enumerate() {
                for c in 0..3 {
                    color[i * 3 + c] = color[i * 3 + c].clamp(0.0, 1.0);
                    s.color[c] = color[i * 3 + c];
                }
                s.opacity_raw = opacity[i];
            }
            iteration += 1;
        }
    }
    let pruned = prune(&cloud, &visibility, cfg.prune_threshold)?;
    log::info!("shape stage kept {} of {} samples", pruned.len(), n);
    Ok(ShapeFit {
        cloud: pruned,
        model,
        visibility,
        stats,
    })
}

/// Mean distance from each point to its nearest neighbor, using a uniform
/// grid. `None` for fewer than two points.
pub fn mean_nearest_neighbor_distance(points: &[Vec3]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let diag = (hi - lo).norm();
    if diag == 0.0 {
        return Some(0.0);
    }
    let cell = diag / (points.len() as f64).sqrt();
    let key = |p: &Vec3| {
        let k = (p - lo) / cell;
        [k.x.floor() as i64, k.y.floor() as i64, k.z.floor() as i64]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let extent = key(&hi).into_iter().max().unwrap_or(0) + 1;
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = key(p);
            let mut best = f64::INFINITY;
            for r in 0..=extent {
                for dx in -r..=r {
                    for dy in -r..=r {
                        for dz in -r..=r {
                            if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                                continue;
                            }
                            if let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                                for &j in list {
                                    if j != i {
                                        best = best.min((points[j] - p).norm());
                                    }
                                }
                            }
                        }
                    }
                }
                // Anything in a farther ring is at least r cells away.
                if best <= r as f64 * cell {
                    break;
                }
            }
            best
        })
        .sum();
    Some(total / points.len() as f64)
}

/// One Gaussian per sample: identity local rotation, isotropic scale of half
/// the mean nearest-neighbor spacing at rest, SH DC from the point color.
pub fn init_gaussians(model: &TemplateModel, cloud: &PsmCloud, sh_degree: usize) -> Result<GaussianSet> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput(
            "cannot initialize Gaussians from an empty cloud".into(),
        ));
    }
    let rest = skin(model, &PoseExpr::zeros(model))?;
    let positions: Vec<Vec3> = deform_samples(&rest, &cloud.samples)?
        .iter()
        .map(|d| d.position)
        .collect();
    let spacing = mean_nearest_neighbor_distance(&positions)
        .filter(|d| *d > 0.0)
        .unwrap_or(2.0 * cloud.radius);
    let log_s = (0.5 * spacing).ln();
    let prims = cloud
        .samples
        .iter()
        .map(|s| {
            let mut sh = [[0.0; 3]; 16];
            sh[0] = s.color.map(|c| (c - SH_DC_OFFSET) / SH_C0);
            GaussianPrimitive {
                base: *s,
                local_q: Quat::IDENTITY,
                log_scale: [log_s; 3],
                sh,
            }
        })
        .collect();
    let set = GaussianSet { prims, sh_degree };
    set.validate()?;
    Ok(set)
}

/// Result of [`fit_appearance`].
#[derive(Clone, Debug)]
pub struct AppearanceFit {
    pub set: GaussianSet,
    pub model: TemplateModel,
    pub stats: Vec<StatRecord>,
}

/// Appearance stage: Gaussians bound to the trained cloud, full loss.
pub fn fit_appearance(
    frames: &[FrameRecord],
    model: &TemplateModel,
    cloud: &PsmCloud,
    cfg: &OptimConfig,
    extractor: &dyn FeatureExtractor,
) -> Result<AppearanceFit> {
    cfg.validate()?;
    check_frames(frames, model)?;
    let set = init_gaussians(model, cloud, cfg.sh_degree)?;
    fit_appearance_from(frames, model, set, cfg, extractor)
}

/// Appearance stage starting from an existing Gaussian set.
pub fn fit_appearance_from(
    frames: &[FrameRecord],
    model: &TemplateModel,
    mut set: GaussianSet,
    cfg: &OptimConfig,
    extractor: &dyn FeatureExtractor,
) -> Result<AppearanceFit> {
    cfg.validate()?;
    check_frames(frames, model)?;
    if set.is_empty() {
        return Err(Error::InvalidInput("Gaussian set is empty".into()));
    }
    let mut model = model.clone();
    let n = set.len();
    let nc = num_coeffs(set.sh_degree);
    let train_corr = !cfg.freeze_corrective_in_stage2;
    let adam = AdamConfig::default();

    let mut q: Vec<f64> = set.prims.iter().flat_map(|g| g.local_q.0).collect();
    let mut ls: Vec<f64> = set.prims.iter().flat_map(|g| g.log_scale).collect();
    let mut op: Vec<f64> = set.prims.iter().map(|g| g.base.opacity_raw).collect();
    let mut sh: Vec<f64> = set
        .prims
        .iter()
        .flat_map(|g| g.sh[..nc].iter().flatten().copied())
        .collect();
    let mut g_q = Group::new(q.len(), cfg.lr.rotation);
    let mut g_ls = Group::new(ls.len(), cfg.lr.log_scale);
    let mut g_op = Group::new(n, cfg.lr.opacity);
    let mut g_sh = Group::new(sh.len(), cfg.lr.sh);
    let mut g_cp = Group::new(model.corrective_pose_basis.len(), cfg.lr.corrective);
    let mut g_ce = Group::new(model.corrective_expr_basis.len(), cfg.lr.corrective);

    // Shifted so the two stages draw different frame orders from one seed.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut stats = Vec::new();
    let mut iteration = 0;
    let samples = set.samples();

    for epoch in 0..cfg.appearance_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for &fi in batch {
                let frame = &frames[fi];
                let (mesh, cache) = skin_with_cache(&model, &frame.pe)?;
                let deformed = deform_samples(&mesh, &samples)?;
                let out = render_gaussians(&set, &deformed, &frame.cam, cfg.background, &cfg.raster)?;
                let rendered = output_image(&out);
                let (mut parts, d_image) = image_losses(&rendered, &frame.image, cfg, extractor);
                parts.scaling = loss_scaling(&set.prims);
                let loss = total_loss(&parts, cfg.lambda_perceptual_eff(), cfg.lambda_scaling);
                if !loss.is_finite() {
                    return Err(non_finite("appearance", epoch, fi, &parts));
                }
                let gg = render_gaussians_backward(&out, &set, &deformed, &frame.cam, &d_image)?;
                let mut d_ls = gg.log_scale.clone();
                loss_scaling_grad(&set.prims, cfg.lambda_scaling, &mut d_ls);
                add_into(&mut g_q.grad, gg.local_q.iter().flat_map(|q| q.0));
                add_into(&mut g_ls.grad, d_ls.iter().flatten().copied());
                add_into(&mut g_op.grad, gg.opacity_raw.iter().copied());
                add_into(
                    &mut g_sh.grad,
                    gg.sh.iter().flat_map(|c| c[..nc].iter().flatten().copied()),
                );
                if train_corr {
                    let mut mg = MeshGrads::zeros(model.num_vertices());
                    deform_backward(&mesh, &samples, &gg.position, &gg.bind_q, &mut mg);
                    let morph = skin_backward(&model, &frame.pe, &mesh, &cache, &mg);
                    add_into(&mut g_cp.grad, morph.d_corrective_pose);
                    add_into(&mut g_ce.grad, morph.d_corrective_expr);
                }
                stats.push(StatRecord {
                    stage: "appearance".into(),
                    epoch,
                    iteration,
                    frame: fi,
                    loss,
                    rgb: parts.rgb,
                    perceptual: parts.perceptual,
                    scaling: parts.scaling,
                    psnr: psnr(&rendered, &frame.image)?,
                });
            }
            let count = batch.len();
            g_q.step(&mut q, count, &adam);
            g_ls.step(&mut ls, count, &adam);
            g_op.step(&mut op, count, &adam);
            g_sh.step(&mut sh, count, &adam);
            if train_corr {
                g_cp.step(&mut model.corrective_pose_basis, count, &adam);
                g_ce.step(&mut model.corrective_expr_basis, count, &adam);
            }
            for (i, g) in set.prims.iter_mut().enumerate() {
                g.local_q = Quat(std::array::from_fn(|k| q[i * 4 + k]));
                g.log_scale = std::array::from_fn(|k| ls[i * 3 + k]);
                g.base.opacity_raw = op[i];
                for j in 0..nc {
                    g.sh[j] = std::array::from_fn(|c| sh[(i * nc + j) * 3 + c]);
                }
            }
            iteration += 1;
        }
    }
    Ok(AppearanceFit { set, model, stats })
}

/// Something renderable for a pose, expression and camera.
#[derive(Clone, Copy, Debug)]
pub enum Avatar<'a> {
    Points(&'a PsmCloud),
    Gaussians(&'a GaussianSet),
}

pub fn render_avatar(
    model: &TemplateModel,
    avatar: Avatar<'_>,
    pe: &PoseExpr,
    cam: &CameraModel,
    background: [f64; 3],
    raster: &RasterConfig,
) -> Result<RenderOutput> {
    let mesh = skin(model, pe)?;
    match avatar {
        Avatar::Points(cloud) => {
            let d = deform_samples(&mesh, &cloud.samples)?;
            render_points(cloud, &d, cam, background, raster)
        }
        Avatar::Gaussians(set) => {
            let d = deform_samples(&mesh, &set.samples())?;
            render_gaussians(set, &d, cam, background, raster)
        }
    }
}

/// Mean metrics of an avatar over a set of frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub frames: usize,
    pub rgb: f64,
    pub psnr: f64,
    pub ssim: f64,
    /// Mean silhouette IoU over frames that carry a mask.
    pub iou: Option<f64>,
}

pub fn evaluate(
    frames: &[FrameRecord],
    model: &TemplateModel,
    avatar: Avatar<'_>,
    background: [f64; 3],
    raster: &RasterConfig,
) -> Result<EvalSummary> {
    let mut s = EvalSummary {
        frames: frames.len(),
        ..Default::default()
    };
    let (mut iou_sum, mut iou_n) = (0.0, 0usize);
    for f in frames {
        let out = render_avatar(model, avatar, &f.pe, &f.cam, background, raster)?;
        let img = output_image(&out);
        s.rgb += loss_rgb(&img, &f.image);
        s.psnr += psnr(&img, &f.image)?;
        s.ssim += ssim(&img, &f.image)?;
        if let Some(m) = &f.mask {
            iou_sum += silhouette_iou(&out.alpha, m);
            iou_n += 1;
        }
    }
    if !frames.is_empty() {
        let k = frames.len() as f64;
        s.rgb /= k;
        s.psnr /= k;
        s.ssim /= k;
    }
    if iou_n > 0 {
        s.iou = Some(iou_sum / iou_n as f64);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_nn(points: &[Vec3]) -> f64 {
        let n = points.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (points[i] - points[j]).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn nearest_neighbor_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 17, 400] {
            let pts: Vec<Vec3> = (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-0.2..0.2),
                        rng.random_range(0.0..3.0),
                    )
                })
                .collect();
            let got = mean_nearest_neighbor_distance(&pts).unwrap();
            assert!((got - brute_nn(&pts)).abs() < 1e-12, "n={n}");
        }
        assert_eq!(mean_nearest_neighbor_distance(&[Vec3::zeros()]), None);
    }

    #[test]
    fn holdout_every_tenth() {
        let (train, test) = holdout_split(25, 10);
        assert_eq!(test, vec![9, 19]);
        assert_eq!(train.len(), 23);
        assert_eq!(holdout_split(5, 0).1, Vec::<usize>::new());
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let c = OptimConfig {
            shape_epochs: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = OptimConfig {
            lambda_scaling: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c: OptimConfig = serde_json::from_str(r#"{"shape_epochs": 3}"#).unwrap();
        assert_eq!(c.shape_epochs, 3);
        assert_eq!(c.lambda_perceptual, 0.1);
        assert!(serde_json::from_str::<OptimConfig>(r#"{"epochs": 3}"#).is_err());
    }
}
