//! Dataset manifest, image codec and loading.

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FrameRecord, Image};
use crate::morphable::{PoseExpr, TemplateModel};
use crate::splat::CameraModel;

pub const MANIFEST_VERSION: u32 = 1;

/// Standard sRGB encoding of a linear value in [0, 1].
pub fn linear_to_srgb(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x == 1.0 {
        1.0
    } else if x <= 0.0031308 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear(x: f64) -> f64 {
    if x >= 1.0 {
        // Exact endpoints; the power laws land one ulp short.
        1.0
    } else if x <= 0.04045 {
        x / 12.92
    } else {
        ((x + 0.055) / 1.055).powf(2.4)
    }
}

pub fn encode_srgb8(img: &Image) -> RgbImage {
    RgbImage::from_fn(img.width, img.height, |x, y| {
        let p = img.at(x, y);
        Rgb(p.map(|v| (linear_to_srgb(v) * 255.0).round() as u8))
    })
}

pub fn decode_srgb8(img: &RgbImage) -> Image {
    let lut: Vec<f64> = (0..256).map(|v| srgb_to_linear(v as f64 / 255.0)).collect();
    Image {
        width: img.width(),
        height: img.height(),
        data: img.pixels().map(|p| p.0.map(|v| lut[v as usize])).collect(),
    }
}

/// PNG bytes of a linear image, sRGB-encoded.
pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    encode_srgb8(img).write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes)?.to_rgb8();
    Ok(decode_srgb8(&img))
}

pub fn save_mask(mask: &[bool], width: u32, height: u32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = GrayImage::from_fn(width, height, |x, y| {
        Luma([if mask[(y * width + x) as usize] { 255 } else { 0 }])
    });
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<bool>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes)?.to_luma8();
    Ok((img.width(), img.height(), img.pixels().map(|p| p.0[0] >= 128).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFrame {
    /// Image path relative to the manifest.
    pub image: String,
    /// Global rotation followed by per-joint rotations, axis-angle, flat.
    pub pose: Vec<f64>,
    pub expression: Vec<f64>,
    pub camera: CameraModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    /// Template path relative to the manifest.
    pub template: String,
    pub frames: Vec<ManifestFrame>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Dataset(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// A loaded dataset: template plus decoded frames.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub template: TemplateModel,
    pub frames: Vec<FrameRecord>,
}

/// Loads the manifest, its template and every frame. Images are decoded to
/// linear RGB.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let template = TemplateModel::load(root.join(&manifest.template))?;
    if manifest.frames.is_empty() {
        return Err(Error::Dataset("manifest lists no frames".into()));
    }
    let frames = manifest
        .frames
        .par_iter()
        .enumerate()
        .map(|(index, f)| {
            load_frame(&root, &template, f).map_err(|e| Error::Frame {
                index,
                msg: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { root, template, frames })
}

fn load_frame(root: &Path, template: &TemplateModel, f: &ManifestFrame) -> Result<FrameRecord> {
    let pe = PoseExpr::from_flat(&f.pose, &f.expression)?;
    pe.validate(template)?;
    f.camera.validate()?;
    let image = load_png(root.join(&f.image))?;
    let mask = match &f.mask {
        Some(p) => {
            let (w, h, m) = load_mask(root.join(p))?;
            if (w, h) != (image.width, image.height) {
                return Err(Error::InvalidInput(format!(
                    "mask is {w}x{h}, image is {}x{}",
                    image.width, image.height
                )));
            }
            Some(m)
        }
        None => None,
    };
    let rec = FrameRecord {
        image,
        pe,
        cam: f.camera,
        mask,
    };
    rec.validate()?;
    Ok(rec)
}
