//! Image metrics: PSNR, windowed SSIM and silhouette IoU.

use crate::error::Result;
use crate::frame::Image;

pub const PSNR_CAP: f64 = 100.0;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_size(b)?;
    let s: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (0..3).map(|c| (x[c] - y[c]).powi(2)).sum::<f64>())
        .sum();
    Ok(s / (a.data.len() * 3).max(1) as f64)
}

/// Peak signal-to-noise ratio for images in [0, 1], capped at 100 dB.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    if m <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * m.log10()).min(PSNR_CAP))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K: (f64, f64) = (0.01, 0.03);

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Per-window SSIM, averaged over channels, for every fully contained
/// window position. The window shrinks for images smaller than 11 pixels.
pub fn ssim_map(a: &Image, b: &Image) -> Result<(usize, usize, Vec<f64>)> {
    a.same_size(b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    let size = SSIM_WINDOW.min(w).min(h);
    let win = gaussian_window(size);
    let (ow, oh) = (w + 1 - size, h + 1 - size);
    let c1 = SSIM_K.0 * SSIM_K.0;
    let c2 = SSIM_K.1 * SSIM_K.1;
    let mut out = vec![0.0; ow * oh];
    for c in 0..3 {
        for oy in 0..oh {
            for ox in 0..ow {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..size {
                    for i in 0..size {
                        let k = win[i] * win[j];
                        let p = (oy + j) * w + ox + i;
                        let (x, y) = (a.data[p][c], b.data[p][c]);
                        mx += k * x;
                        my += k * y;
                        xx += k * x * x;
                        yy += k * y * y;
                        xy += k * x * y;
                    }
                }
                let vx = xx - mx * mx;
                let vy = yy - my * my;
                let cxy = xy - mx * my;
                let s = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                out[oy * ow + ox] += s / 3.0;
            }
        }
    }
    Ok((ow, oh, out))
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    let (_, _, m) = ssim_map(a, b)?;
    Ok(m.iter().sum::<f64>() / m.len().max(1) as f64)
}

/// Intersection over union of `alpha > 0.5` against a boolean mask.
pub fn silhouette_iou(alpha: &[f64], mask: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &m) in alpha.iter().zip(mask) {
        let r = a > 0.5;
        inter += (r && m) as usize;
        union += (r || m) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, w: u32, h: u32) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_data(
            w,
            h,
            (0..w * h)
                .map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_images() {
        let a = noise(1, 20, 16);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mse_of_one_percent_is_20db() {
        let a = Image::new(8, 8, [0.2; 3]);
        let b = Image::new(8, 8, [0.3; 3]);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn inverted_binary_image_is_anticorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = 24u32;
        let a = Image::from_data(
            w,
            w,
            (0..w * w)
                .map(|_| [if rng.random_bool(0.5) { 1.0 } else { 0.0 }; 3])
                .collect(),
        )
        .unwrap();
        let b = Image::from_data(w, w, a.data.iter().map(|p| p.map(|v| 1.0 - v)).collect()).unwrap();
        let (_, _, m) = ssim_map(&a, &b).unwrap();
        assert!(
            m.iter().all(|&s| s <= 0.0),
            "max {}",
            m.iter().cloned().fold(f64::MIN, f64::max)
        );
    }

    #[test]
    fn size_mismatch_is_error() {
        assert!(psnr(&Image::new(2, 2, [0.0; 3]), &Image::new(3, 2, [0.0; 3])).is_err());
    }

    #[test]
    fn iou_cases() {
        assert_eq!(
            silhouette_iou(&[1.0, 0.0, 1.0, 0.0], &[true, false, false, true]),
            1.0 / 3.0
        );
        assert_eq!(silhouette_iou(&[0.0; 3], &[false; 3]), 1.0);
    }
}
