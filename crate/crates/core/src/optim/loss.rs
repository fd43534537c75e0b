//! Photometric, feature-space and scale-regularization losses with their
//! gradients.

use crate::frame::Image;
use crate::splat::GaussianPrimitive;

/// Mean absolute error over pixels and channels.
pub fn loss_rgb(rendered: &Image, target: &Image) -> f64 {
    let n = (rendered.data.len() * 3) as f64;
    rendered
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs())
        .sum::<f64>()
        / n
}

/// Adds `scale · ∂loss_rgb/∂rendered` into `grad`.
pub fn loss_rgb_grad(rendered: &Image, target: &Image, scale: f64, grad: &mut [[f64; 3]]) {
    let w = scale / (rendered.data.len() * 3) as f64;
    for ((g, a), b) in grad.iter_mut().zip(&rendered.data).zip(&target.data) {
        for c in 0..3 {
            g[c] += w * sign(a[c] - b[c]);
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A named, flat feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub name: String,
    pub values: Vec<f64>,
}

/// Differentiable feature extractor for the feature-space loss. The loss is
/// the sum over maps of the mean absolute feature difference.
pub trait FeatureExtractor: Send + Sync {
    fn extract(&self, img: &Image) -> Vec<FeatureMap>;

    /// Gradient with respect to the image of `Σ_k ⟨d_features[k], F_k(img)⟩`.
    fn backward(&self, img: &Image, d_features: &[Vec<f64>]) -> Vec<[f64; 3]>;
}

/// Low-pass pyramid: at each level the (2×2 box-filtered) image and its
/// forward-difference gradients. Linear, so the backward is its adjoint.
#[derive(Clone, Copy, Debug)]
pub struct PyramidExtractor {
    pub levels: usize,
}

impl Default for PyramidExtractor {
    fn default() -> Self {
        PyramidExtractor { levels: 4 }
    }
}

struct Plane {
    w: usize,
    h: usize,
    v: Vec<[f64; 3]>,
}

fn downsample(p: &Plane) -> Plane {
    let (w, h) = (p.w / 2, p.h / 2);
    let mut v = vec![[0.0; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = |dx: usize, dy: usize| p.v[(2 * y + dy) * p.w + 2 * x + dx];
            let (a, b, c, d) = (i(0, 0), i(1, 0), i(0, 1), i(1, 1));
            v[y * w + x] = std::array::from_fn(|k| 0.25 * (a[k] + b[k] + c[k] + d[k]));
        }
    }
    Plane { w, h, v }
}

fn downsample_adjoint(g: &Plane, w: usize, h: usize) -> Plane {
    let mut v = vec![[0.0; 3]; w * h];
    for y in 0..g.h {
        for x in 0..g.w {
            let d = g.v[y * g.w + x];
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let t = &mut v[(2 * y + dy) * w + 2 * x + dx];
                for k in 0..3 {
                    t[k] += 0.25 * d[k];
                }
            }
        }
    }
    Plane { w, h, v }
}

impl PyramidExtractor {
    fn planes(&self, img: &Image) -> Vec<Plane> {
        let mut out = vec![Plane {
            w: img.width as usize,
            h: img.height as usize,
            v: img.data.clone(),
        }];
        while out.len() < self.levels {
            let last = out.last().expect("nonempty");
            if last.w < 2 || last.h < 2 {
                break;
            }
            out.push(downsample(last));
        }
        out
    }
}

fn gradients(p: &Plane) -> Vec<f64> {
    let mut out = Vec::with_capacity(((p.w.saturating_sub(1)) * p.h + p.w * p.h.saturating_sub(1)) * 3);
    for y in 0..p.h {
        for x in 0..p.w.saturating_sub(1) {
            let (a, b) = (p.v[y * p.w + x], p.v[y * p.w + x + 1]);
            out.extend((0..3).map(|k| b[k] - a[k]));
        }
    }
    for y in 0..p.h.saturating_sub(1) {
        for x in 0..p.w {
            let (a, b) = (p.v[y * p.w + x], p.v[(y + 1) * p.w + x]);
            out.extend((0..3).map(|k| b[k] - a[k]));
        }
    }
    out
}

fn gradients_adjoint(d: &[f64], w: usize, h: usize, acc: &mut [[f64; 3]]) {
    let mut i = 0;
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            for k in 0..3 {
                acc[y * w + x + 1][k] += d[i + k];
                acc[y * w + x][k] -= d[i + k];
            }
            i += 3;
        }
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            for k in 0..3 {
                acc[(y + 1) * w + x][k] += d[i + k];
                acc[y * w + x][k] -= d[i + k];
            }
            i += 3;
        }
    }
}

impl FeatureExtractor for PyramidExtractor {
    fn extract(&self, img: &Image) -> Vec<FeatureMap> {
        let mut maps = Vec::new();
        for (l, p) in self.planes(img).iter().enumerate() {
            maps.push(FeatureMap {
                name: format!("level{l}/intensity"),
                values: p.v.iter().flatten().copied().collect(),
            });
            maps.push(FeatureMap {
                name: format!("level{l}/gradient"),
                values: gradients(p),
            });
        }
        maps
    }

    fn backward(&self, img: &Image, d_features: &[Vec<f64>]) -> Vec<[f64; 3]> {
        let planes = self.planes(img);
        // Walk from the coarsest level down, pushing each level's gradient
        // through the downsampling adjoint into the next finer one.
        let mut carry: Option<Plane> = None;
        for l in (0..planes.len()).rev() {
            let (w, h) = (planes[l].w, planes[l].h);
            let mut acc = match carry.take() {
                Some(c) => downsample_adjoint(&c, w, h).v,
                None => vec![[0.0; 3]; w * h],
            };
            for (a, d) in acc.iter_mut().zip(d_features[2 * l].chunks_exact(3)) {
                for k in 0..3 {
                    a[k] += d[k];
                }
            }
            gradients_adjoint(&d_features[2 * l + 1], w, h, &mut acc);
            carry = Some(Plane { w, h, v: acc });
        }
        carry.map(|p| p.v).unwrap_or_default()
    }
}

/// Per-map mean absolute feature differences.
pub fn perceptual_terms(rendered: &Image, target: &Image, extractor: &dyn FeatureExtractor) -> Vec<(String, f64)> {
    let fa = extractor.extract(rendered);
    let fb = extractor.extract(target);
    fa.iter()
        .zip(&fb)
        .map(|(a, b)| {
            let n = a.values.len().max(1) as f64;
            let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum();
            (a.name.clone(), s / n)
        })
        .collect()
}

pub fn loss_perceptual(rendered: &Image, target: &Image, extractor: &dyn FeatureExtractor) -> f64 {
    perceptual_terms(rendered, target, extractor)
        .iter()
        .map(|(_, v)| v)
        .sum()
}

/// Adds `scale · ∂loss_perceptual/∂rendered` into `grad`.
pub fn loss_perceptual_grad(
    rendered: &Image,
    target: &Image,
    extractor: &dyn FeatureExtractor,
    scale: f64,
    grad: &mut [[f64; 3]],
) {
    let fa = extractor.extract(rendered);
    let fb = extractor.extract(target);
    let d: Vec<Vec<f64>> = fa
        .iter()
        .zip(&fb)
        .map(|(a, b)| {
            let w = scale / a.values.len().max(1) as f64;
            a.values.iter().zip(&b.values).map(|(x, y)| w * sign(x - y)).collect()
        })
        .collect();
    for (g, v) in grad.iter_mut().zip(extractor.backward(rendered, &d)) {
        for k in 0..3 {
            g[k] += v[k];
        }
    }
}

/// Mean Euclidean norm of the scale vectors; zero (with a warning) when empty.
pub fn loss_scaling(prims: &[GaussianPrimitive]) -> f64 {
    if prims.is_empty() {
        log::warn!("scaling loss over an empty primitive set");
        return 0.0;
    }
    prims.iter().map(|g| g.scale().norm()).sum::<f64>() / prims.len() as f64
}

/// Adds `scale · ∂loss_scaling/∂log_scale` into `grad`.
pub fn loss_scaling_grad(prims: &[GaussianPrimitive], scale: f64, grad: &mut [[f64; 3]]) {
    if prims.is_empty() {
        return;
    }
    let w = scale / prims.len() as f64;
    for (g, p) in grad.iter_mut().zip(prims) {
        let s = p.scale();
        let n = s.norm();
        if n > 0.0 {
            for k in 0..3 {
                g[k] += w * s[k] * s[k] / n;
            }
        }
    }
}

/// Loss components of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub rgb: f64,
    pub perceptual: f64,
    pub scaling: f64,
}

pub fn total_loss(parts: &LossParts, lambda_perceptual: f64, lambda_scaling: f64) -> f64 {
    parts.rgb + lambda_perceptual * parts.perceptual + lambda_scaling * parts.scaling
}
