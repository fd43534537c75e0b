use crate::error::{Error, Result};
use crate::morphable::PoseExpr;
use crate::splat::CameraModel;

/// Row-major linear RGB image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32, fill: [f64; 3]) -> Self {
        Image {
            width,
            height,
            data: vec![fill; (width * height) as usize],
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != (width * height) as usize {
            return Err(Error::dim("image pixels", (width * height) as usize, data.len()));
        }
        Ok(Image { width, height, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, x: u32, y: u32) -> [f64; 3] {
        self.data[(y * self.width + x) as usize]
    }

    pub fn same_size(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::InvalidInput(format!(
                "image sizes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// One tracked frame: target image, pose/expression and camera.
#[derive(Clone, Debug)]
pub struct FrameRecord {
    pub image: Image,
    pub pe: PoseExpr,
    pub cam: CameraModel,
    /// Foreground mask (1 = head), same size as the image.
    pub mask: Option<Vec<bool>>,
}

impl FrameRecord {
    pub fn validate(&self) -> Result<()> {
        self.cam.validate()?;
        if self.image.width != self.cam.width || self.image.height != self.cam.height {
            return Err(Error::InvalidInput(format!(
                "image is {}x{} but camera is {}x{}",
                self.image.width, self.image.height, self.cam.width, self.cam.height
            )));
        }
        if self.image.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("frame image".into()));
        }
        if let Some(m) = &self.mask {
            if m.len() != self.image.len() {
                return Err(Error::dim("mask pixels", self.image.len(), m.len()));
            }
        }
        Ok(())
    }
}
