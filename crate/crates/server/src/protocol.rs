//! Wire formats: versioned JSON control messages and the binary frame header.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;
pub const FRAME_MAGIC: [u8; 4] = *b"PSFR";
pub const FRAME_HEADER_LEN: usize = 16;

/// Either a full vector or a sparse `{"index": value}` patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorUpdate<T> {
    Full(Vec<T>),
    Sparse(BTreeMap<String, T>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraUpdate {
    /// Orbit angles in radians, distance in meters.
    pub azimuth: Option<f64>,
    pub elevation: Option<f64>,
    pub distance: Option<f64>,
    /// Explicit row-major extrinsics; overrides the orbit until the next
    /// orbit field arrives.
    pub world_to_camera: Option<[f64; 16]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetParams {
    /// Flat pose vector: global axis-angle then one axis-angle per joint.
    pub pose: Option<VectorUpdate<f64>>,
    /// Per-joint axis-angle patch, keyed by joint index.
    pub joints: Option<BTreeMap<String, [f64; 3]>>,
    pub expr: Option<VectorUpdate<f64>>,
    pub camera: Option<CameraUpdate>,
    pub resolution: Option<Resolution>,
}

/// Client → server text messages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetParams(SetParams),
    /// Returns `n` frame credits to the server.
    Credit {
        n: u32,
    },
    GetState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitState {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

/// Server → client text messages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Ack {
        v: u32,
        ok: bool,
        /// Parameter sequence number after handling the message.
        seq: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    State {
        v: u32,
        seq: u64,
        pose: Vec<f64>,
        expr: Vec<f64>,
        orbit: OrbitState,
        world_to_camera: [f64; 16],
        resolution: Resolution,
        num_expr: usize,
        num_joints: usize,
    },
    Stats {
        v: u32,
        fps: f64,
        frames: u64,
        render_ms: f64,
    },
}

/// Parses a client text message; the error string is suitable for an ack.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
    let v = value
        .as_object_mut()
        .and_then(|o| o.remove("v"))
        .and_then(|v| v.as_u64())
        .ok_or("message lacks a numeric \"v\" field")?;
    if v != PROTOCOL_VERSION as u64 {
        return Err(format!(
            "unsupported protocol version {v} (expected {PROTOCOL_VERSION})"
        ));
    }
    serde_json::from_value(value).map_err(|e| format!("bad message: {e}"))
}

pub fn encode_frame(width: u32, height: u32, seq: u32, png: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + png.len());
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&seq.to_le_bytes());
    out.extend_from_slice(png);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub width: u32,
    pub height: u32,
    pub seq: u32,
}

/// Splits a binary frame into header and PNG payload.
pub fn decode_frame(bytes: &[u8]) -> Option<(FrameHeader, &[u8])> {
    if bytes.len() < FRAME_HEADER_LEN || bytes[..4] != FRAME_MAGIC {
        return None;
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    Some((
        FrameHeader {
            width: word(4),
            height: word(8),
            seq: word(12),
        },
        &bytes[FRAME_HEADER_LEN..],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let f = encode_frame(256, 128, 7, &[1, 2, 3]);
        assert_eq!(&f[..16], b"PSFR\x00\x01\x00\x00\x80\x00\x00\x00\x07\x00\x00\x00");
        let (h, payload) = decode_frame(&f).unwrap();
        assert_eq!(
            h,
            FrameHeader {
                width: 256,
                height: 128,
                seq: 7
            }
        );
        assert_eq!(payload, &[1, 2, 3]);
        assert!(decode_frame(b"PSFX0000000000000000").is_none());
        assert!(decode_frame(b"PSFR").is_none());
    }

    #[test]
    fn control_messages_parse() {
        let m = parse_client(r#"{"v":1,"type":"set_params","expr":{"2":0.5}}"#).unwrap();
        let ClientMessage::SetParams(p) = m else { panic!() };
        assert_eq!(p.expr, Some(VectorUpdate::Sparse([("2".to_string(), 0.5)].into())));
        let m = parse_client(r#"{"v":1,"type":"set_params","expr":[0.1,0.2]}"#).unwrap();
        assert!(matches!(
            m,
            ClientMessage::SetParams(SetParams {
                expr: Some(VectorUpdate::Full(_)),
                ..
            })
        ));
        assert_eq!(
            parse_client(r#"{"v":1,"type":"credit","n":2}"#).unwrap(),
            ClientMessage::Credit { n: 2 }
        );
        assert_eq!(
            parse_client(r#"{"v":1,"type":"get_state"}"#).unwrap(),
            ClientMessage::GetState
        );
        assert!(parse_client(r#"{"v":2,"type":"get_state"}"#)
            .unwrap_err()
            .contains("version"));
        assert!(parse_client(r#"{"type":"get_state"}"#).is_err());
        assert!(parse_client(r#"{"v":1,"type":"set_params","bogus":1}"#).is_err());
    }
}
