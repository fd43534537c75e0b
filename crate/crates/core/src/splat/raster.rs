//! Tile rasterizer over screen-space splats, forward and reverse.
//!
//! Primitives are sorted once by `(depth, id)` and binned into 16×16 tiles,
//! so each tile list is already in front-to-back order. Inside a tile the
//! loop runs over fragments and keeps per-pixel transmittance, which gives
//! exactly the per-pixel compositing order while touching only the pixels a
//! primitive covers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rasterization constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterConfig {
    pub tile_size: u32,
    pub alpha_max: f64,
    /// Gaussian fragments below this opacity are skipped.
    pub alpha_min: f64,
    /// Support half-width in standard deviations of the major axis.
    pub radius_sigma: f64,
    /// Isotropic screen-space variance added to every projected Gaussian (px²).
    pub cov_floor: f64,
    pub near: f64,
    /// A pixel stops accepting fragments once transmittance drops below this.
    pub min_transmittance: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            tile_size: 16,
            alpha_max: 0.99,
            alpha_min: 1.0 / 255.0,
            radius_sigma: 3.0,
            cov_floor: 0.3,
            near: 0.01,
            min_transmittance: 1e-4,
        }
    }
}

/// Screen-space footprint of one primitive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// Disc of the given pixel radius with a quadratic falloff.
    Point { radius: f64 },
    /// Gaussian with inverse covariance `[[a, b], [b, c]]`.
    Gaussian { conic: [f64; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat {
    pub mean: [f64; 2],
    pub depth: f64,
    /// Half-width of the square that bounds the support, in pixels.
    pub extent: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    pub kernel: Kernel,
}

/// Gradient with respect to the fields of a [`Splat`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SplatGrad {
    pub mean: [f64; 2],
    pub opacity: f64,
    pub color: [f64; 3],
    /// Point radius gradient (point kernel only).
    pub radius: f64,
    /// Conic gradient, `b` counted once (Gaussian kernel only).
    pub conic: [f64; 3],
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        for i in 0..2 {
            self.mean[i] += o.mean[i];
        }
        for i in 0..3 {
            self.color[i] += o.color[i];
            self.conic[i] += o.conic[i];
        }
        self.opacity += o.opacity;
        self.radius += o.radius;
    }
}

/// `σ (1 − d²/r²)` clamped to `[0, alpha_max]`; zero outside the disc.
pub fn point_alpha(sigma: f64, d: f64, r: f64, alpha_max: f64) -> f64 {
    if !(r > 0.0) || d >= r {
        return 0.0;
    }
    (sigma * (1.0 - d * d / (r * r))).clamp(0.0, alpha_max)
}

/// `σ exp(−½ Δᵀ C Δ)` clamped to `alpha_max`, or zero below `alpha_min`.
pub fn gaussian_alpha(conic: &[f64; 3], delta: [f64; 2], sigma: f64, alpha_max: f64, alpha_min: f64) -> f64 {
    let [dx, dy] = delta;
    let power = -0.5 * (conic[0] * dx * dx + conic[2] * dy * dy) - conic[1] * dx * dy;
    let a = (sigma * power.exp()).min(alpha_max);
    if a < alpha_min || !(a > 0.0) {
        0.0
    } else {
        a
    }
}

/// Front-to-back compositing of already sorted `(α, color)` fragments.
pub fn composite_pixel(fragments: &[(f64, [f64; 3])], background: [f64; 3], min_transmittance: f64) -> [f64; 3] {
    let mut c = [0.0; 3];
    let mut t = 1.0;
    for (a, col) in fragments {
        for i in 0..3 {
            c[i] += a * t * col[i];
        }
        t *= 1.0 - a;
        if t < min_transmittance {
            break;
        }
    }
    std::array::from_fn(|i| c[i] + t * background[i])
}

/// Opacity of `s` at the center of pixel `(px, py)`, zero when the pixel is
/// outside its support.
#[inline]
pub fn fragment_alpha(s: &Splat, px: u32, py: u32, cfg: &RasterConfig) -> f64 {
    let dx = px as f64 + 0.5 - s.mean[0];
    let dy = py as f64 + 0.5 - s.mean[1];
    if dx.abs() > s.extent || dy.abs() > s.extent {
        return 0.0;
    }
    match s.kernel {
        Kernel::Point { radius } => point_alpha(s.opacity, (dx * dx + dy * dy).sqrt(), radius, cfg.alpha_max),
        Kernel::Gaussian { conic } => gaussian_alpha(&conic, [dx, dy], s.opacity, cfg.alpha_max, cfg.alpha_min),
    }
}

/// Forward pass result plus what the reverse pass needs.
#[derive(Clone, Debug)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB.
    pub image: Vec<[f64; 3]>,
    /// Accumulated opacity `1 − T`.
    pub alpha: Vec<f64>,
    pub max_weight: Vec<f64>,
    background: [f64; 3],
    tiles: Vec<Vec<u32>>,
    final_t: Vec<f64>,
    /// Per pixel, one past the tile-list index of the last fragment composited.
    last: Vec<u32>,
}

struct TileGeom {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
}

fn tile_geom(width: u32, height: u32, tile: u32, index: usize) -> TileGeom {
    let tiles_x = width.div_ceil(tile);
    let tx = index as u32 % tiles_x;
    let ty = index as u32 / tiles_x;
    let x0 = tx * tile;
    let y0 = ty * tile;
    TileGeom {
        x0,
        y0,
        w: tile.min(width - x0),
        h: tile.min(height - y0),
    }
}

/// Pixel index range (inclusive) whose centers may lie in the support square.
fn pixel_range(center: f64, extent: f64, size: u32) -> Option<(u32, u32)> {
    let lo = (center - extent - 0.5).floor() - 1.0;
    let hi = (center + extent - 0.5).ceil() + 1.0;
    if hi < 0.0 || lo > (size - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as u32, hi.min((size - 1) as f64) as u32))
}

fn clip(range: (u32, u32), start: u32, len: u32) -> Option<(u32, u32)> {
    let lo = range.0.max(start);
    let hi = range.1.min(start + len - 1);
    (lo <= hi).then_some((lo, hi))
}

fn bin(splats: &[Option<Splat>], width: u32, height: u32, tile: u32) -> Vec<Vec<u32>> {
    let tiles_x = width.div_ceil(tile);
    let tiles_y = height.div_ceil(tile);
    let mut order: Vec<u32> = (0..splats.len() as u32)
        .filter(|&i| splats[i as usize].is_some())
        .collect();
    order.sort_by(|&a, &b| {
        let da = splats[a as usize].as_ref().map_or(0.0, |s| s.depth);
        let db = splats[b as usize].as_ref().map_or(0.0, |s| s.depth);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    let mut tiles = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for id in order {
        let s = splats[id as usize].as_ref().expect("filtered");
        let (Some(xr), Some(yr)) = (
            pixel_range(s.mean[0], s.extent, width),
            pixel_range(s.mean[1], s.extent, height),
        ) else {
            continue;
        };
        for ty in yr.0 / tile..=yr.1 / tile {
            for tx in xr.0 / tile..=xr.1 / tile {
                tiles[(ty * tiles_x + tx) as usize].push(id);
            }
        }
    }
    tiles
}

/// Per-splat bound on the columns a row can reach. Only Gaussian splats are
/// narrowed; the exponent threshold sits slightly below the exact one so no
/// contributing pixel is ever dropped.
#[derive(Clone, Copy)]
enum RowBound {
    Square,
    Ellipse { inv_a: f64, b: f64, det: f64, cut2: f64 },
}

impl RowBound {
    fn new(s: &Splat, cfg: &RasterConfig) -> Self {
        match s.kernel {
            Kernel::Gaussian { conic: [a, b, c] } if s.opacity > 0.0 && cfg.alpha_min > 0.0 && a > 0.0 => {
                let cut = (cfg.alpha_min / s.opacity).ln() - 1e-6;
                RowBound::Ellipse {
                    inv_a: 1.0 / a,
                    b,
                    det: a * c,
                    cut2: 2.0 * a * cut,
                }
            }
            _ => RowBound::Square,
        }
    }

    /// Columns of row `py` inside `xr` that may reach `alpha_min`, with at
    /// least a pixel of padding on each side.
    fn span(self, s: &Splat, py: u32, xr: (u32, u32)) -> Option<(u32, u32)> {
        let dy = py as f64 + 0.5 - s.mean[1];
        if dy.abs() > s.extent {
            return None;
        }
        let RowBound::Ellipse { inv_a, b, det, cut2 } = self else {
            return Some(xr);
        };
        // -½(a dx² + c dy²) − b dx dy ≥ cut, as a quadratic in dx.
        let disc = (b * b - det) * dy * dy - cut2;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let x0 = s.mean[0] - 0.5 + (-b * dy - root) * inv_a;
        let x1 = s.mean[0] - 0.5 + (-b * dy + root) * inv_a;
        // Truncation is within one pixel of floor/ceil; the extra pixel of
        // padding keeps the bound conservative.
        let lo = (x0 as i64 - 2).max(xr.0 as i64);
        let hi = (x1 as i64 + 2).min(xr.1 as i64);
        (lo <= hi).then_some((lo as u32, hi as u32))
    }
}

/// Compositing state of one pixel inside a tile.
#[derive(Clone, Copy)]
struct PixelState {
    color: [f64; 3],
    t: f64,
    last: u32,
    done: bool,
}

struct TileForward {
    pixels: Vec<PixelState>,
    weights: Vec<(u32, f64)>,
}

fn forward_tile(
    splats: &[Option<Splat>],
    list: &[u32],
    g: &TileGeom,
    width: u32,
    height: u32,
    cfg: &RasterConfig,
) -> TileForward {
    let n = (g.w * g.h) as usize;
    let mut pixels = vec![
        PixelState {
            color: [0.0; 3],
            t: 1.0,
            last: 0,
            done: false,
        };
        n
    ];
    let mut active = n;
    let mut weights = Vec::new();
    for (k, &id) in list.iter().enumerate() {
        if active == 0 {
            break;
        }
        let s = splats[id as usize].as_ref().expect("binned splats exist");
        let (Some(xr), Some(yr)) = (
            pixel_range(s.mean[0], s.extent, width).and_then(|r| clip(r, g.x0, g.w)),
            pixel_range(s.mean[1], s.extent, height).and_then(|r| clip(r, g.y0, g.h)),
        ) else {
            continue;
        };
        let bound = RowBound::new(s, cfg);
        let mut wmax = 0.0f64;
        for py in yr.0..=yr.1 {
            let Some(xs) = bound.span(s, py, xr) else { continue };
            let row = ((py - g.y0) * g.w) as usize;
            let span = &mut pixels[row + (xs.0 - g.x0) as usize..=row + (xs.1 - g.x0) as usize];
            for (px, st) in (xs.0..=xs.1).zip(span.iter_mut()) {
                if st.done {
                    continue;
                }
                let a = fragment_alpha(s, px, py, cfg);
                if a <= 0.0 {
                    continue;
                }
                let w = a * st.t;
                for c in 0..3 {
                    st.color[c] += w * s.color[c];
                }
                st.t *= 1.0 - a;
                st.last = k as u32 + 1;
                wmax = wmax.max(w);
                if st.t < cfg.min_transmittance {
                    st.done = true;
                    active -= 1;
                }
            }
        }
        if wmax > 0.0 {
            weights.push((id, wmax));
        }
    }
    TileForward { pixels, weights }
}

/// Renders `splats` (indexed by primitive id; `None` = culled).
pub fn rasterize(
    splats: &[Option<Splat>],
    width: u32,
    height: u32,
    background: [f64; 3],
    cfg: &RasterConfig,
) -> Result<Raster> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!("zero-size image {width}x{height}")));
    }
    if cfg.tile_size == 0 {
        return Err(Error::InvalidInput("tile size must be positive".into()));
    }
    let tile = cfg.tile_size;
    let tiles = bin(splats, width, height, tile);
    let results: Vec<TileForward> = tiles
        .par_iter()
        .enumerate()
        .map(|(i, list)| forward_tile(splats, list, &tile_geom(width, height, tile, i), width, height, cfg))
        .collect();

    let npix = (width * height) as usize;
    let mut image = vec![[0.0; 3]; npix];
    let mut alpha = vec![0.0; npix];
    let mut final_t = vec![1.0; npix];
    let mut last = vec![0u32; npix];
    let mut max_weight = vec![0.0f64; splats.len()];
    for (i, r) in results.into_iter().enumerate() {
        let g = tile_geom(width, height, tile, i);
        for ly in 0..g.h {
            for lx in 0..g.w {
                let lp = (ly * g.w + lx) as usize;
                let p = ((g.y0 + ly) * width + g.x0 + lx) as usize;
                let st = &r.pixels[lp];
                let t = st.t;
                image[p] = std::array::from_fn(|c| st.color[c] + t * background[c]);
                alpha[p] = 1.0 - t;
                final_t[p] = t;
                last[p] = st.last;
            }
        }
        for (id, w) in r.weights {
            let m = &mut max_weight[id as usize];
            *m = m.max(w);
        }
    }
    Ok(Raster {
        width,
        height,
        image,
        alpha,
        max_weight,
        background,
        tiles,
        final_t,
        last,
    })
}

fn backward_tile(
    splats: &[Option<Splat>],
    raster: &Raster,
    list: &[u32],
    g: &TileGeom,
    d_image: &[[f64; 3]],
    cfg: &RasterConfig,
) -> Vec<SplatGrad> {
    let (width, height) = (raster.width, raster.height);
    let n = (g.w * g.h) as usize;
    let mut grads = vec![SplatGrad::default(); list.len()];
    let mut behind = vec![raster.background; n];
    let mut t_cur = vec![0.0; n];
    let mut last = vec![0u32; n];
    let mut dl = vec![[0.0; 3]; n];
    for ly in 0..g.h {
        for lx in 0..g.w {
            let lp = (ly * g.w + lx) as usize;
            let p = ((g.y0 + ly) * width + g.x0 + lx) as usize;
            t_cur[lp] = raster.final_t[p];
            last[lp] = raster.last[p];
            dl[lp] = d_image[p];
        }
    }
    for k in (0..list.len()).rev() {
        let s = splats[list[k] as usize].as_ref().expect("binned splats exist");
        let (Some(xr), Some(yr)) = (
            pixel_range(s.mean[0], s.extent, width).and_then(|r| clip(r, g.x0, g.w)),
            pixel_range(s.mean[1], s.extent, height).and_then(|r| clip(r, g.y0, g.h)),
        ) else {
            continue;
        };
        let gk = &mut grads[k];
        let bound = RowBound::new(s, cfg);
        for py in yr.0..=yr.1 {
            let Some(xs) = bound.span(s, py, xr) else { continue };
            let row = ((py - g.y0) * g.w) as usize;
            for px in xs.0..=xs.1 {
                let p = row + (px - g.x0) as usize;
                if k as u32 >= last[p] {
                    continue;
                }
                let a = fragment_alpha(s, px, py, cfg);
                if a <= 0.0 {
                    continue;
                }
                let t_i = t_cur[p] / (1.0 - a);
                let d = dl[p];
                let mut d_alpha = 0.0;
                for c in 0..3 {
                    gk.color[c] += a * t_i * d[c];
                    d_alpha += (s.color[c] - behind[p][c]) * d[c];
                    behind[p][c] = a * s.color[c] + (1.0 - a) * behind[p][c];
                }
                d_alpha *= t_i;
                t_cur[p] = t_i;

                let dx = px as f64 + 0.5 - s.mean[0];
                let dy = py as f64 + 0.5 - s.mean[1];
                match s.kernel {
                    Kernel::Point { radius } => {
                        let r2 = radius * radius;
                        let d2 = dx * dx + dy * dy;
                        if s.opacity * (1.0 - d2 / r2) >= cfg.alpha_max {
                            continue;
                        }
                        gk.opacity += (1.0 - d2 / r2) * d_alpha;
                        let d_d2 = -s.opacity / r2 * d_alpha;
                        gk.mean[0] -= 2.0 * dx * d_d2;
                        gk.mean[1] -= 2.0 * dy * d_d2;
                        gk.radius += 2.0 * s.opacity * d2 / (r2 * radius) * d_alpha;
                    }
                    Kernel::Gaussian { conic } => {
                        let power = -0.5 * (conic[0] * dx * dx + conic[2] * dy * dy) - conic[1] * dx * dy;
                        let gval = power.exp();
                        if s.opacity * gval > cfg.alpha_max {
                            continue;
                        }
                        gk.opacity += gval * d_alpha;
                        let d_power = s.opacity * gval * d_alpha;
                        // ∂power/∂mean = C Δ
                        gk.mean[0] += (conic[0] * dx + conic[1] * dy) * d_power;
                        gk.mean[1] += (conic[1] * dx + conic[2] * dy) * d_power;
                        gk.conic[0] -= 0.5 * dx * dx * d_power;
                        gk.conic[1] -= dx * dy * d_power;
                        gk.conic[2] -= 0.5 * dy * dy * d_power;
                    }
                }
            }
        }
    }
    grads
}

/// Gradients of a scalar loss with respect to every splat, given the
/// gradient on the rendered image. Culled entries get zero gradients.
pub fn rasterize_backward(
    splats: &[Option<Splat>],
    raster: &Raster,
    d_image: &[[f64; 3]],
    cfg: &RasterConfig,
) -> Result<Vec<SplatGrad>> {
    let npix = (raster.width * raster.height) as usize;
    if d_image.len() != npix {
        return Err(Error::dim("image gradient", npix, d_image.len()));
    }
    if splats.len() != raster.max_weight.len() {
        return Err(Error::InvalidInput("splat list does not match the forward pass".into()));
    }
    let tile = cfg.tile_size;
    let partial: Vec<Vec<SplatGrad>> = raster
        .tiles
        .par_iter()
        .enumerate()
        .map(|(i, list)| {
            backward_tile(
                splats,
                raster,
                list,
                &tile_geom(raster.width, raster.height, tile, i),
                d_image,
                cfg,
            )
        })
        .collect();
    // Reduce in tile order so the sums do not depend on scheduling.
    let mut out = vec![SplatGrad::default(); splats.len()];
    for (list, grads) in raster.tiles.iter().zip(&partial) {
        for (id, g) in list.iter().zip(grads) {
            out[*id as usize].add(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_kernels() {
        assert_eq!(point_alpha(1.0, 0.0, 1.0, 0.99), 0.99);
        assert!((point_alpha(0.8, 0.5, 1.0, 0.99) - 0.6).abs() < 1e-15);
        assert_eq!(point_alpha(1.0, 1.0, 1.0, 0.99), 0.0);
        assert_eq!(
            gaussian_alpha(&[1.0, 0.0, 1.0], [0.0, 0.0], 0.7, 0.99, 1.0 / 255.0),
            0.7
        );
        let a = gaussian_alpha(&[1.0, 0.0, 1.0], [2.0, 0.0], 1.0, 0.99, 1.0 / 255.0);
        assert!((a - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(
            gaussian_alpha(&[1.0, 0.0, 1.0], [0.0, 0.0], 0.0, 0.99, 1.0 / 255.0),
            0.0
        );
        assert_eq!(
            gaussian_alpha(&[1.0, 0.0, 1.0], [4.0, 0.0], 1.0, 0.99, 1.0 / 255.0),
            0.0
        );
    }

    #[test]
    fn compositing_cases() {
        let black = [0.0; 3];
        assert_eq!(composite_pixel(&[], [0.2, 0.3, 0.4], 1e-4), [0.2, 0.3, 0.4]);
        assert_eq!(
            composite_pixel(&[(0.99, [1.0, 0.0, 0.0])], black, 1e-4),
            [0.99, 0.0, 0.0]
        );
        let c = composite_pixel(&[(0.5, [1.0, 0.0, 0.0]), (0.5, [0.0, 1.0, 0.0])], black, 1e-4);
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.25).abs() < 1e-15 && c[2] == 0.0);
    }

    proptest::proptest! {
        #[test]
        fn row_bound_keeps_every_contributing_pixel(
            mx in 0.0f64..64.0, my in 0.0f64..64.0,
            sx in 0.3f64..12.0, sy in 0.05f64..12.0, theta in 0.0f64..std::f64::consts::PI,
            opacity in 0.004f64..1.0,
        ) {
            let cfg = RasterConfig::default();
            let (cs, sn) = (theta.cos(), theta.sin());
            let (vx, vy) = (sx * sx, sy * sy);
            let cov = [cs * cs * vx + sn * sn * vy, cs * sn * (vx - vy), sn * sn * vx + cs * cs * vy];
            let det = cov[0] * cov[2] - cov[1] * cov[1];
            let s = Splat {
                mean: [mx, my],
                depth: 1.0,
                extent: cfg.radius_sigma * sx.max(sy),
                opacity,
                color: [1.0; 3],
                kernel: Kernel::Gaussian { conic: [cov[2] / det, -cov[1] / det, cov[0] / det] },
            };
            let bound = RowBound::new(&s, &cfg);
            for py in 0..64u32 {
                let span = bound.span(&s, py, (0, 63));
                for px in 0..64u32 {
                    if fragment_alpha(&s, px, py, &cfg) > 0.0 {
                        let (lo, hi) = span.expect("row with a contributing pixel");
                        proptest::prop_assert!(lo <= px && px <= hi, "pixel {px},{py} outside {lo}..={hi}");
                    }
                }
            }
        }
    }

    fn disc(x: f64, y: f64, depth: f64, r: f64, opacity: f64, color: [f64; 3]) -> Option<Splat> {
        Some(Splat {
            mean: [x, y],
            depth,
            extent: r,
            opacity,
            color,
            kernel: Kernel::Point { radius: r },
        })
    }

    #[test]
    fn empty_scene_is_background() {
        let r = rasterize(&[], 20, 10, [0.1, 0.2, 0.3], &RasterConfig::default()).unwrap();
        assert!(r.image.iter().all(|p| *p == [0.1, 0.2, 0.3]));
        assert!(r.alpha.iter().all(|&a| a == 0.0));
        assert!(rasterize(&[], 0, 10, [0.0; 3], &RasterConfig::default()).is_err());
    }

    #[test]
    fn occluded_fragment_gets_no_gradient() {
        let cfg = RasterConfig::default();
        let mut splats = Vec::new();
        // Several opaque discs drive transmittance below the cutoff first.
        for i in 0..5 {
            splats.push(disc(8.0, 8.0, 1.0 + i as f64 * 0.01, 20.0, 1.0, [1.0, 0.0, 0.0]));
        }
        splats.push(disc(8.0, 8.0, 2.0, 2.0, 0.5, [0.0, 1.0, 0.0]));
        let r = rasterize(&splats, 16, 16, [0.0; 3], &cfg).unwrap();
        assert_eq!(r.max_weight[5], 0.0);
        let g = rasterize_backward(&splats, &r, &vec![[1.0; 3]; 256], &cfg).unwrap();
        assert_eq!(g[5], SplatGrad::default());
        let zero = rasterize_backward(&splats, &r, &vec![[0.0; 3]; 256], &cfg).unwrap();
        assert!(zero.iter().all(|g| *g == SplatGrad::default()));
    }

    #[test]
    fn splat_crossing_tiles_is_seamless() {
        let cfg = RasterConfig::default();
        let splats = vec![disc(16.0, 16.0, 1.0, 5.0, 0.8, [0.2, 0.4, 0.9])];
        let r = rasterize(&splats, 32, 32, [1.0; 3], &cfg).unwrap();
        for (y, x) in [(13, 13), (13, 18), (18, 13), (18, 18)] {
            let a = r.alpha[y * 32 + x];
            assert!((a - r.alpha[13 * 32 + 13]).abs() < 1e-15, "{x},{y}");
        }
    }
}
