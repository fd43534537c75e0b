//! Synchronous session state: parameter updates, snapshots and rendering.
//! The async service serializes access to one [`SessionCore`].

use std::sync::Arc;
use std::time::Instant;

use headsplat::io::{encode_png, Checkpoint};
use headsplat::math::Vec3;
use headsplat::morphable::{PoseExpr, TemplateModel};
use headsplat::optim::{render_avatar, Avatar};
use headsplat::splat::{CameraModel, GaussianSet, RasterConfig};

use crate::protocol::{
    encode_frame, ClientMessage, OrbitState, Resolution, ServerMessage, SetParams, VectorUpdate, PROTOCOL_VERSION,
};

pub const MIN_RESOLUTION: u32 = 16;
pub const MAX_RESOLUTION: u32 = 2048;

/// The loaded avatar: template with trained correctives plus Gaussians.
#[derive(Debug)]
pub struct AvatarAsset {
    pub model: TemplateModel,
    pub set: GaussianSet,
    pub background: [f64; 3],
    pub raster: RasterConfig,
}

impl AvatarAsset {
    pub fn from_checkpoint(template: &TemplateModel, ckpt: &Checkpoint) -> headsplat::Result<Self> {
        let set = ckpt.gaussians.clone().ok_or_else(|| {
            headsplat::Error::Checkpoint("serving needs an appearance-stage checkpoint with Gaussians".into())
        })?;
        Ok(AvatarAsset {
            model: ckpt.apply_correctives(template)?,
            set,
            background: [1.0; 3],
            raster: RasterConfig::default(),
        })
    }
}

/// Camera settings independent of resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewParams {
    pub orbit: OrbitState,
    pub target: Vec3,
    /// Explicit extrinsics, when set by the client.
    pub world_to_camera: Option<[f64; 16]>,
    /// Focal length in pixels per pixel of image width.
    pub focal_per_width: f64,
    pub width: u32,
    pub height: u32,
}

impl ViewParams {
    pub fn camera(&self) -> CameraModel {
        let f = self.focal_per_width * self.width as f64;
        let orbit = CameraModel::orbit(
            &self.target,
            self.orbit.azimuth,
            self.orbit.elevation,
            self.orbit.distance,
            f,
            self.width,
            self.height,
        );
        match self.world_to_camera {
            Some(m) => CameraModel {
                world_to_camera: m,
                ..orbit
            },
            None => orbit,
        }
    }
}

/// An immutable copy of everything a frame depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub seq: u64,
    pub pe: PoseExpr,
    pub view: ViewParams,
}

pub struct RenderedFrame {
    pub width: u32,
    pub height: u32,
    /// PNG payload without the frame header.
    pub png: Vec<u8>,
    pub render_ms: f64,
}

impl RenderedFrame {
    pub fn message(&self, seq: u32) -> Vec<u8> {
        encode_frame(self.width, self.height, seq, &self.png)
    }
}

pub fn render_snapshot(asset: &AvatarAsset, snap: &Snapshot) -> headsplat::Result<RenderedFrame> {
    let t = Instant::now();
    let cam = snap.view.camera();
    let out = render_avatar(
        &asset.model,
        Avatar::Gaussians(&asset.set),
        &snap.pe,
        &cam,
        asset.background,
        &asset.raster,
    )?;
    let img = headsplat::frame::Image::from_data(out.width, out.height, out.image)?;
    let png = encode_png(&img)?;
    Ok(RenderedFrame {
        width: cam.width,
        height: cam.height,
        png,
        render_ms: t.elapsed().as_secs_f64() * 1e3,
    })
}

pub struct SessionCore {
    asset: Arc<AvatarAsset>,
    current: Snapshot,
}

/// Outcome of one control message.
pub struct Handled {
    pub reply: ServerMessage,
    pub changed: bool,
}

impl SessionCore {
    pub fn new(asset: Arc<AvatarAsset>, width: u32, height: u32) -> Self {
        let pe = PoseExpr::zeros(&asset.model);
        let view = ViewParams {
            orbit: OrbitState {
                azimuth: 0.0,
                elevation: 0.0,
                distance: 0.55,
            },
            target: Vec3::zeros(),
            world_to_camera: None,
            focal_per_width: 180.0 / 128.0,
            width,
            height,
        };
        SessionCore {
            asset,
            current: Snapshot { seq: 0, pe, view },
        }
    }

    pub fn asset(&self) -> &Arc<AvatarAsset> {
        &self.asset
    }

    pub fn snapshot(&self) -> Snapshot {
        self.current.clone()
    }

    pub fn state_message(&self) -> ServerMessage {
        let s = &self.current;
        ServerMessage::State {
            v: PROTOCOL_VERSION,
            seq: s.seq,
            pose: s.pe.pose_flat(),
            expr: s.pe.expr.clone(),
            orbit: s.view.orbit.clone(),
            world_to_camera: s.view.camera().world_to_camera,
            resolution: Resolution {
                width: s.view.width,
                height: s.view.height,
            },
            num_expr: self.asset.model.num_expr(),
            num_joints: self.asset.model.num_joints(),
        }
    }

    /// Handles a parsed message other than credits. Invalid updates leave
    /// the state untouched.
    pub fn handle(&mut self, msg: &ClientMessage) -> Handled {
        match msg {
            ClientMessage::GetState => Handled {
                reply: self.state_message(),
                changed: false,
            },
            ClientMessage::Credit { .. } => self.ack(None, false),
            ClientMessage::SetParams(p) => match self.apply(p) {
                Ok(next) => {
                    let changed = next.pe != self.current.pe || next.view != self.current.view;
                    if changed {
                        self.current = Snapshot {
                            seq: self.current.seq + 1,
                            ..next
                        };
                    }
                    self.ack(None, changed)
                }
                Err(e) => self.ack(Some(e), false),
            },
        }
    }

    /// Handles raw text; parse errors become error acks.
    pub fn handle_text(&mut self, text: &str) -> Handled {
        match crate::protocol::parse_client(text) {
            Ok(m) => self.handle(&m),
            Err(e) => self.reject(e),
        }
    }

    /// Error ack for a message that could not be parsed.
    pub fn reject(&self, error: String) -> Handled {
        self.ack(Some(error), false)
    }

    fn ack(&self, error: Option<String>, changed: bool) -> Handled {
        Handled {
            reply: ServerMessage::Ack {
                v: PROTOCOL_VERSION,
                ok: error.is_none(),
                seq: self.current.seq,
                error,
            },
            changed,
        }
    }

    fn apply(&self, p: &SetParams) -> Result<Snapshot, String> {
        let model = &self.asset.model;
        let nj = model.num_joints();
        let k = model.num_expr();
        let mut next = self.current.clone();

        if let Some(pose) = &p.pose {
            let mut flat = next.pe.pose_flat();
            patch(&mut flat, pose, "pose", 3 + 3 * nj)?;
            next.pe = PoseExpr::from_flat(&flat, &next.pe.expr).map_err(|e| e.to_string())?;
        }
        if let Some(joints) = &p.joints {
            for (key, aa) in joints {
                let j = index(key, nj, "joint")?;
                next.pe.joints[j] = *aa;
            }
        }
        if let Some(expr) = &p.expr {
            patch(&mut next.pe.expr, expr, "expr", k)?;
        }
        if let Some(cam) = &p.camera {
            let o = &mut next.view.orbit;
            if let Some(a) = cam.azimuth {
                o.azimuth = a;
            }
            if let Some(e) = cam.elevation {
                o.elevation = e.clamp(-1.5, 1.5);
            }
            if let Some(d) = cam.distance {
                if !(d > 0.05) {
                    return Err(format!("camera distance {d} must exceed 0.05"));
                }
                o.distance = d;
            }
            if cam.azimuth.is_some() || cam.elevation.is_some() || cam.distance.is_some() {
                next.view.world_to_camera = None;
            }
            if let Some(m) = cam.world_to_camera {
                next.view.world_to_camera = Some(m);
            }
        }
        if let Some(r) = &p.resolution {
            for (name, v) in [("width", r.width), ("height", r.height)] {
                if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&v) {
                    return Err(format!(
                        "resolution {name} {v} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]"
                    ));
                }
            }
            next.view.width = r.width;
            next.view.height = r.height;
        }
        let values = next.pe.pose_flat().into_iter().chain(next.pe.expr.iter().copied());
        if values.chain(next.view.camera().world_to_camera).any(|x| !x.is_finite()) {
            return Err("non-finite parameter".into());
        }
        next.view.camera().validate().map_err(|e| e.to_string())?;
        Ok(next)
    }
}

fn index(key: &str, len: usize, what: &str) -> Result<usize, String> {
    let i: usize = key
        .parse()
        .map_err(|_| format!("{what} index {key:?} is not an integer"))?;
    if i >= len {
        return Err(format!("{what} index {i} out of range (0..{len})"));
    }
    Ok(i)
}

fn patch(dst: &mut [f64], update: &VectorUpdate<f64>, what: &str, expected: usize) -> Result<(), String> {
    match update {
        VectorUpdate::Full(v) => {
            if v.len() != expected {
                return Err(format!("{what} has {} entries, expected {expected}", v.len()));
            }
            dst.copy_from_slice(v);
        }
        VectorUpdate::Sparse(m) => {
            for (key, value) in m {
                dst[index(key, expected, what)?] = *value;
            }
        }
    }
    Ok(())
}
