//! Binary framing shared by the bridge, its clients and the benchmarks.
//!
//! Every frame is a 16-byte little-endian header followed by the payload:
//!
//! ```text
//! 0  magic        "ASAB"
//! 4  version      u8   (1)
//! 5  msg_type     u8
//! 6  flags        u16  (reserved, written as 0)
//! 8  payload_len  u32
//! 12 crc32        u32  CRC-32/ISO-HDLC of the payload
//! ```
//!
//! `PROTOCOL.md` at the repository root documents every payload layout with
//! golden hex dumps.

mod datagram;
mod meter;

pub use datagram::{
    chunk_stream_frame, chunk_with_limit, Datagram, Reassembler, ReassemblyCounters,
    ReassemblyEvent, DATAGRAM_HEADER_LEN, DATAGRAM_MAGIC, MAX_CHUNK_PAYLOAD,
};
pub use meter::{meter, Meter, StreamStats};

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, UnitQuaternion, Vec3};
use crate::pointcloud::{Point, PointCloud, ShadingMode};

pub const FRAME_MAGIC: [u8; 4] = *b"ASAB";
pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
pub const MAX_FRAME_ID: usize = 255;
/// Bytes per point in a `PointCloud` payload.
pub const POINT_RECORD_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("crc mismatch: header says {expected:#010x}, payload hashes to {actual:#010x}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("payload of {0} bytes exceeds the 64 MiB limit")]
    PayloadTooLarge(usize),
    #[error("frame id of {0} bytes exceeds 255")]
    FrameIdTooLong(usize),
    #[error("text field is not valid UTF-8")]
    InvalidUtf8,
    #[error("invalid field value: {0}")]
    InvalidValue(String),
    #[error("datagram: {0}")]
    Datagram(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Subscribe = 2,
    PointCloud = 3,
    Pose = 4,
    Twist = 5,
    StreamFrame = 6,
    TagObservation = 7,
    ModeChange = 8,
    Heartbeat = 9,
}

impl MsgType {
    pub const ALL: [MsgType; 9] = [
        MsgType::Hello,
        MsgType::Subscribe,
        MsgType::PointCloud,
        MsgType::Pose,
        MsgType::Twist,
        MsgType::StreamFrame,
        MsgType::TagObservation,
        MsgType::ModeChange,
        MsgType::Heartbeat,
    ];

    pub fn from_u8(v: u8) -> Result<Self, WireError> {
        Self::ALL
            .get((v as usize).wrapping_sub(1))
            .copied()
            .ok_or(WireError::UnknownType(v))
    }

    pub fn name(&self) -> &'static str {
        match self {
            MsgType::Hello => "hello",
            MsgType::Subscribe => "subscribe",
            MsgType::PointCloud => "point_cloud",
            MsgType::Pose => "pose",
            MsgType::Twist => "twist",
            MsgType::StreamFrame => "stream_frame",
            MsgType::TagObservation => "tag_observation",
            MsgType::ModeChange => "mode_change",
            MsgType::Heartbeat => "heartbeat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Role {
    Publisher = 1,
    Subscriber = 2,
    Both = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum SubscribeAction {
    Subscribe = 1,
    Unsubscribe = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Hello {
        role: Role,
        name: String,
    },
    Subscribe {
        action: SubscribeAction,
        topic: String,
    },
    PointCloud {
        points: Vec<Point>,
    },
    Pose {
        pose: Pose,
    },
    /// Linear velocity m/s, angular velocity rad/s.
    Twist {
        linear: f64,
        angular: f64,
    },
    StreamFrame {
        stream_id: u16,
        seq: u32,
        data: Vec<u8>,
    },
    TagObservation {
        tag_id: u32,
        pose: Pose,
    },
    ModeChange {
        mode: ShadingMode,
    },
    Heartbeat,
}

impl Body {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Body::Hello { .. } => MsgType::Hello,
            Body::Subscribe { .. } => MsgType::Subscribe,
            Body::PointCloud { .. } => MsgType::PointCloud,
            Body::Pose { .. } => MsgType::Pose,
            Body::Twist { .. } => MsgType::Twist,
            Body::StreamFrame { .. } => MsgType::StreamFrame,
            Body::TagObservation { .. } => MsgType::TagObservation,
            Body::ModeChange { .. } => MsgType::ModeChange,
            Body::Heartbeat => MsgType::Heartbeat,
        }
    }
}

/// A framed bridge message. Heartbeats carry only the timestamp, so their
/// `frame_id` must be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub timestamp_ns: u64,
    pub frame_id: String,
    pub body: Body,
}

impl WireMessage {
    pub fn new(timestamp_ns: u64, frame_id: impl Into<String>, body: Body) -> Self {
        Self {
            timestamp_ns,
            frame_id: frame_id.into(),
            body,
        }
    }

    pub fn heartbeat(timestamp_ns: u64) -> Self {
        Self::new(timestamp_ns, "", Body::Heartbeat)
    }

    pub fn point_cloud(cloud: &PointCloud) -> Self {
        Self::new(
            cloud.timestamp_ns(),
            cloud.frame_id(),
            Body::PointCloud {
                points: cloud.points().to_vec(),
            },
        )
    }

    pub fn pose(timestamp_ns: u64, frame_id: impl Into<String>, pose: Pose) -> Self {
        Self::new(timestamp_ns, frame_id, Body::Pose { pose })
    }

    pub fn twist(timestamp_ns: u64, linear: f64, angular: f64) -> Self {
        Self::new(timestamp_ns, "base_link", Body::Twist { linear, angular })
    }

    pub fn msg_type(&self) -> MsgType {
        self.body.msg_type()
    }

    /// Rebuilds a [`PointCloud`] from a `PointCloud` message.
    pub fn to_point_cloud(&self) -> Option<PointCloud> {
        match &self.body {
            Body::PointCloud { points } => {
                PointCloud::new(self.frame_id.clone(), self.timestamp_ns, points.clone()).ok()
            }
            _ => None,
        }
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.push(s.len() as u8);
    out.extend_from_slice(s.as_bytes());
}

fn put_pose(out: &mut Vec<u8>, p: &Pose) {
    for v in p.translation.to_array() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in p.rotation.to_array() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

const POSE_LEN: usize = 7 * 8;

fn mode_params(mode: &ShadingMode) -> (u8, Vec<f64>) {
    match *mode {
        ShadingMode::DistanceRamp { near, far } => (1, vec![near, far]),
        ShadingMode::AxisColor { min, max } => (2, vec![min.x, min.y, min.z, max.x, max.y, max.z]),
        ShadingMode::DepthRainbow {
            near,
            far,
            wavelength,
        } => (3, vec![near, far, wavelength]),
        ShadingMode::NaturalColor {
            near_cutoff,
            far_cutoff,
        } => (4, vec![near_cutoff, far_cutoff]),
        ShadingMode::Sonar {
            period,
            max_range,
            pulse_width,
        } => (5, vec![period, max_range, pulse_width]),
    }
}

fn body_len(msg: &WireMessage) -> Result<usize, WireError> {
    let prefix = 1 + msg.frame_id.len() + 8;
    let len = match &msg.body {
        Body::Heartbeat => return Ok(8),
        Body::Hello { name, .. } => prefix + 1 + 1 + name.len(),
        Body::Subscribe { topic, .. } => prefix + 1 + 1 + topic.len(),
        Body::PointCloud { points } => points
            .len()
            .checked_mul(POINT_RECORD_LEN)
            .and_then(|n| n.checked_add(prefix + 4))
            .ok_or(WireError::PayloadTooLarge(usize::MAX))?,
        Body::Pose { .. } => prefix + POSE_LEN,
        Body::Twist { .. } => prefix + 16,
        Body::StreamFrame { data, .. } => prefix + 2 + 4 + 4 + data.len(),
        Body::TagObservation { .. } => prefix + 4 + POSE_LEN,
        Body::ModeChange { mode } => prefix + 1 + 8 * mode_params(mode).1.len(),
    };
    Ok(len)
}

fn check_short_str(s: &str, what: &str) -> Result<(), WireError> {
    if s.len() > MAX_FRAME_ID {
        return Err(WireError::InvalidValue(format!(
            "{what} of {} bytes exceeds 255",
            s.len()
        )));
    }
    Ok(())
}

/// Serializes `msg` into one frame. All checks run before any byte is
/// produced.
pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    if msg.frame_id.len() > MAX_FRAME_ID {
        return Err(WireError::FrameIdTooLong(msg.frame_id.len()));
    }
    if matches!(msg.body, Body::Heartbeat) && !msg.frame_id.is_empty() {
        return Err(WireError::InvalidValue(
            "heartbeat frames carry no frame id".into(),
        ));
    }
    match &msg.body {
        Body::Hello { name, .. } => check_short_str(name, "hello name")?,
        Body::Subscribe { topic, .. } => check_short_str(topic, "topic")?,
        Body::StreamFrame { data, .. } if data.len() > u32::MAX as usize => {
            return Err(WireError::PayloadTooLarge(data.len()))
        }
        _ => {}
    }
    let len = body_len(msg)?;
    if len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }

    let mut out = Vec::with_capacity(HEADER_LEN + len);
    out.extend_from_slice(&FRAME_MAGIC);
    out.push(PROTOCOL_VERSION);
    out.push(msg.msg_type() as u8);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(len as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]); // crc, patched below

    if !matches!(msg.body, Body::Heartbeat) {
        put_str(&mut out, &msg.frame_id);
    }
    out.extend_from_slice(&msg.timestamp_ns.to_le_bytes());
    match &msg.body {
        Body::Heartbeat => {}
        Body::Hello { role, name } => {
            out.push(*role as u8);
            put_str(&mut out, name);
        }
        Body::Subscribe { action, topic } => {
            out.push(*action as u8);
            put_str(&mut out, topic);
        }
        Body::PointCloud { points } => {
            out.extend_from_slice(&(points.len() as u32).to_le_bytes());
            for p in points {
                for c in p.position {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                out.extend_from_slice(&p.color);
                out.push(0);
            }
        }
        Body::Pose { pose } => put_pose(&mut out, pose),
        Body::Twist { linear, angular } => {
            out.extend_from_slice(&linear.to_le_bytes());
            out.extend_from_slice(&angular.to_le_bytes());
        }
        Body::StreamFrame {
            stream_id,
            seq,
            data,
        } => {
            out.extend_from_slice(&stream_id.to_le_bytes());
            out.extend_from_slice(&seq.to_le_bytes());
            out.extend_from_slice(&(data.len() as u32).to_le_bytes());
            out.extend_from_slice(data);
        }
        Body::TagObservation { tag_id, pose } => {
            out.extend_from_slice(&tag_id.to_le_bytes());
            put_pose(&mut out, pose);
        }
        Body::ModeChange { mode } => {
            let (tag, params) = mode_params(mode);
            out.push(tag);
            for p in params {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
    }
    debug_assert_eq!(out.len(), HEADER_LEN + len);
    let crc = crc32fast::hash(&out[HEADER_LEN..]);
    out[12..16].copy_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parsed frame header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub msg_type: MsgType,
    pub flags: u16,
    pub payload_len: u32,
    pub crc32: u32,
}

impl FrameHeader {
    pub fn parse(b: &[u8]) -> Result<Self, WireError> {
        if b.len() < HEADER_LEN {
            return Err(WireError::Truncated {
                needed: HEADER_LEN,
                available: b.len(),
            });
        }
        let magic = [b[0], b[1], b[2], b[3]];
        if magic != FRAME_MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        if b[4] != PROTOCOL_VERSION {
            return Err(WireError::UnsupportedVersion(b[4]));
        }
        let msg_type = MsgType::from_u8(b[5])?;
        let flags = u16::from_le_bytes([b[6], b[7]]);
        let payload_len = u32::from_le_bytes([b[8], b[9], b[10], b[11]]);
        if payload_len as usize > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLarge(payload_len as usize));
        }
        let crc32 = u32::from_le_bytes([b[12], b[13], b[14], b[15]]);
        Ok(Self {
            msg_type,
            flags,
            payload_len,
            crc32,
        })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(WireError::LengthMismatch(format!(
                "payload needs {n} more bytes at offset {}, {available} left",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn finite(&mut self, what: &str) -> Result<f64, WireError> {
        let v = self.f64()?;
        if !v.is_finite() {
            return Err(WireError::InvalidValue(format!("{what} is not finite")));
        }
        Ok(v)
    }

    fn string(&mut self) -> Result<String, WireError> {
        let n = self.u8()? as usize;
        let bytes = self.take(n)?;
        std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|_| WireError::InvalidUtf8)
    }

    fn pose(&mut self) -> Result<Pose, WireError> {
        let t = Vec3::new(
            self.finite("translation")?,
            self.finite("translation")?,
            self.finite("translation")?,
        );
        let (w, x, y, z) = (self.f64()?, self.f64()?, self.f64()?, self.f64()?);
        let q = UnitQuaternion::from_unit_components(w, x, y, z)
            .map_err(|e| WireError::InvalidValue(format!("rotation: {e}")))?;
        Ok(Pose::new(t, q))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn decode_payload(msg_type: MsgType, payload: &[u8]) -> Result<WireMessage, WireError> {
    let mut c = Cursor {
        buf: payload,
        pos: 0,
    };
    if msg_type == MsgType::Heartbeat {
        let ts = c.u64()?;
        if c.remaining() != 0 {
            return Err(WireError::LengthMismatch(format!(
                "{} trailing payload bytes",
                c.remaining()
            )));
        }
        return Ok(WireMessage::heartbeat(ts));
    }
    let frame_id = c.string()?;
    let timestamp_ns = c.u64()?;
    let body = match msg_type {
        MsgType::Heartbeat => unreachable!("handled above"),
        MsgType::Hello => {
            let role = match c.u8()? {
                1 => Role::Publisher,
                2 => Role::Subscriber,
                3 => Role::Both,
                r => return Err(WireError::InvalidValue(format!("role {r}"))),
            };
            Body::Hello {
                role,
                name: c.string()?,
            }
        }
        MsgType::Subscribe => {
            let action = match c.u8()? {
                1 => SubscribeAction::Subscribe,
                2 => SubscribeAction::Unsubscribe,
                a => return Err(WireError::InvalidValue(format!("subscribe action {a}"))),
            };
            Body::Subscribe {
                action,
                topic: c.string()?,
            }
        }
        MsgType::PointCloud => {
            let count = c.u32()? as usize;
            let expected = count.checked_mul(POINT_RECORD_LEN);
            if expected != Some(c.remaining()) {
                return Err(WireError::LengthMismatch(format!(
                    "{count} points need {} bytes, payload has {}",
                    count.saturating_mul(POINT_RECORD_LEN),
                    c.remaining()
                )));
            }
            let mut points = Vec::with_capacity(count);
            for _ in 0..count {
                let position = [c.f32()?, c.f32()?, c.f32()?];
                if position.iter().any(|v| !v.is_finite()) {
                    return Err(WireError::InvalidValue("non-finite point position".into()));
                }
                let rec = c.take(4)?;
                points.push(Point {
                    position,
                    color: [rec[0], rec[1], rec[2]],
                });
            }
            Body::PointCloud { points }
        }
        MsgType::Pose => Body::Pose { pose: c.pose()? },
        MsgType::Twist => Body::Twist {
            linear: c.finite("linear velocity")?,
            angular: c.finite("angular velocity")?,
        },
        MsgType::StreamFrame => {
            let stream_id = c.u16()?;
            let seq = c.u32()?;
            let n = c.u32()? as usize;
            Body::StreamFrame {
                stream_id,
                seq,
                data: c.take(n)?.to_vec(),
            }
        }
        MsgType::TagObservation => Body::TagObservation {
            tag_id: c.u32()?,
            pose: c.pose()?,
        },
        MsgType::ModeChange => {
            let tag = c.u8()?;
            let mut p = |n: usize| -> Result<Vec<f64>, WireError> {
                (0..n).map(|_| c.finite("mode parameter")).collect()
            };
            let mode = match tag {
                1 => {
                    let v = p(2)?;
                    ShadingMode::DistanceRamp {
                        near: v[0],
                        far: v[1],
                    }
                }
                2 => {
                    let v = p(6)?;
                    ShadingMode::AxisColor {
                        min: Vec3::new(v[0], v[1], v[2]),
                        max: Vec3::new(v[3], v[4], v[5]),
                    }
                }
                3 => {
                    let v = p(3)?;
                    ShadingMode::DepthRainbow {
                        near: v[0],
                        far: v[1],
                        wavelength: v[2],
                    }
                }
                4 => {
                    let v = p(2)?;
                    ShadingMode::NaturalColor {
                        near_cutoff: v[0],
                        far_cutoff: v[1],
                    }
                }
                5 => {
                    let v = p(3)?;
                    ShadingMode::Sonar {
                        period: v[0],
                        max_range: v[1],
                        pulse_width: v[2],
                    }
                }
                t => return Err(WireError::InvalidValue(format!("shading mode tag {t}"))),
            };
            mode.validate()
                .map_err(|e| WireError::InvalidValue(e.to_string()))?;
            Body::ModeChange { mode }
        }
    };
    if c.remaining() != 0 {
        return Err(WireError::LengthMismatch(format!(
            "{} trailing payload bytes",
            c.remaining()
        )));
    }
    Ok(WireMessage {
        timestamp_ns,
        frame_id,
        body,
    })
}

/// Decodes the frame at the start of `bytes`, returning it and the number of
/// bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(WireMessage, usize), WireError> {
    let header = FrameHeader::parse(bytes)?;
    let total = HEADER_LEN + header.payload_len as usize;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    let payload = &bytes[HEADER_LEN..total];
    let actual = crc32fast::hash(payload);
    if actual != header.crc32 {
        return Err(WireError::CrcMismatch {
            expected: header.crc32,
            actual,
        });
    }
    Ok((decode_payload(header.msg_type, payload)?, total))
}

/// Decodes exactly one frame; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, WireError> {
    let (msg, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(WireError::LengthMismatch(format!(
            "{} bytes after the frame",
            bytes.len() - used
        )));
    }
    Ok(msg)
}

/// Reads one frame from a byte stream. Returns `Ok(None)` on a clean EOF at
/// a frame boundary. Allocation is bounded by the header's `payload_len`,
/// which is itself capped at 64 MiB.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<(WireMessage, usize)>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(WireError::Truncated {
                    needed: HEADER_LEN,
                    available: got,
                })
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let h = FrameHeader::parse(&header)?;
    // grow with the bytes that actually arrive, never past the declared length
    let want = HEADER_LEN + h.payload_len as usize;
    let mut frame = Vec::with_capacity(want.min(HEADER_LEN + 64 * 1024));
    frame.extend_from_slice(&header);
    while frame.len() < want {
        if frame.len() == frame.capacity() {
            let target = (frame.capacity() * 2).min(want);
            frame.reserve_exact(target - frame.len());
        }
        let start = frame.len();
        frame.resize((start + (64 << 10)).min(frame.capacity()).min(want), 0);
        match r.read(&mut frame[start..]) {
            Ok(0) => {
                return Err(WireError::Truncated {
                    needed: want,
                    available: start,
                })
            }
            Ok(n) => frame.truncate(start + n),
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => frame.truncate(start),
            Err(e) => return Err(e.into()),
        }
    }
    let len = frame.len();
    decode(&frame).map(|m| Some((m, len)))
}

/// Nanoseconds on a process-wide monotonic clock. Send and receive stamps
/// taken in one process are directly comparable.
pub fn monotonic_ns() -> u64 {
    static EPOCH: std::sync::OnceLock<std::time::Instant> = std::sync::OnceLock::new();
    EPOCH
        .get_or_init(std::time::Instant::now)
        .elapsed()
        .as_nanos() as u64
}

/// Lowercase hex, 16 bytes per line, for dumps and golden fixtures.
pub fn hex_dump(bytes: &[u8]) -> String {
    bytes
        .chunks(16)
        .map(|line| {
            line.iter()
                .map(|b| format!("{b:02x}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One-line human-readable summary of a message.
pub fn describe(msg: &WireMessage) -> String {
    let head = format!(
        "{} ts={} frame_id={:?}",
        msg.msg_type().name(),
        msg.timestamp_ns,
        msg.frame_id
    );
    let tail = match &msg.body {
        Body::Hello { role, name } => format!("role={role:?} name={name:?}"),
        Body::Subscribe { action, topic } => format!("action={action:?} topic={topic:?}"),
        Body::PointCloud { points } => format!("points={}", points.len()),
        Body::Pose { pose } => format_pose(pose),
        Body::Twist { linear, angular } => format!("linear={linear} angular={angular}"),
        Body::StreamFrame {
            stream_id,
            seq,
            data,
        } => format!("stream={stream_id} seq={seq} bytes={}", data.len()),
        Body::TagObservation { tag_id, pose } => format!("tag={tag_id} {}", format_pose(pose)),
        Body::ModeChange { mode } => format!("mode={mode:?}"),
        Body::Heartbeat => String::new(),
    };
    if tail.is_empty() {
        head
    } else {
        format!("{head} {tail}")
    }
}

fn format_pose(p: &Pose) -> String {
    let t = p.translation;
    let q = p.rotation.to_array();
    format!(
        "t=({:.4},{:.4},{:.4}) q=({:.6},{:.6},{:.6},{:.6})",
        t.x, t.y, t.z, q[0], q[1], q[2], q[3]
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heartbeat_golden_bytes() {
        let bytes = encode(&WireMessage::heartbeat(0)).unwrap();
        // payload: eight zero bytes; CRC-32 of that is 0x6522df69
        let expected: [u8; 24] = [
            b'A', b'S', b'A', b'B', 1, 9, 0, 0, 8, 0, 0, 0, 0x69, 0xdf, 0x22, 0x65, 0, 0, 0, 0, 0,
            0, 0, 0,
        ];
        assert_eq!(bytes, expected);
        assert_eq!(decode(&bytes).unwrap(), WireMessage::heartbeat(0));
    }

    #[test]
    fn empty_point_cloud_length() {
        let msg = WireMessage::new(5, "map", Body::PointCloud { points: vec![] });
        let bytes = encode(&msg).unwrap();
        let h = FrameHeader::parse(&bytes).unwrap();
        assert_eq!(h.payload_len as usize, "map".len() + 13);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 0, 0]);
        assert_eq!(decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn bit_flip_is_crc_mismatch() {
        let msg = WireMessage::twist(7, 0.5, -0.25);
        let mut bytes = encode(&msg).unwrap();
        bytes[HEADER_LEN + 3] ^= 0x10;
        assert!(matches!(decode(&bytes), Err(WireError::CrcMismatch { .. })));
    }

    #[test]
    fn truncated_header() {
        let bytes = encode(&WireMessage::heartbeat(1)).unwrap();
        assert!(matches!(
            decode(&bytes[..15]),
            Err(WireError::Truncated {
                needed: 16,
                available: 15
            })
        ));
        assert!(matches!(
            decode(&bytes[..20]),
            Err(WireError::Truncated { .. })
        ));
    }

    #[test]
    fn header_errors_are_distinct() {
        let good = encode(&WireMessage::heartbeat(1)).unwrap();
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(WireError::BadMagic(_))));
        let mut b = good.clone();
        b[4] = 2;
        assert!(matches!(decode(&b), Err(WireError::UnsupportedVersion(2))));
        let mut b = good.clone();
        b[5] = 42;
        assert!(matches!(decode(&b), Err(WireError::UnknownType(42))));
        let mut b = good.clone();
        b[8..12].copy_from_slice(&(MAX_PAYLOAD as u32 + 1).to_le_bytes());
        assert!(matches!(decode(&b), Err(WireError::PayloadTooLarge(_))));
        let mut b = good;
        b.push(0);
        assert!(matches!(decode(&b), Err(WireError::LengthMismatch(_))));
    }

    #[test]
    fn inconsistent_point_count() {
        let msg = WireMessage::new(
            1,
            "m",
            Body::PointCloud {
                points: vec![Point::new([1.0, 2.0, 3.0], [4, 5, 6])],
            },
        );
        let mut b = encode(&msg).unwrap();
        // count field sits after frame id (2 bytes) and timestamp (8)
        let off = HEADER_LEN + 2 + 8;
        b[off..off + 4].copy_from_slice(&1_000_000u32.to_le_bytes());
        let crc = crc32fast::hash(&b[HEADER_LEN..]);
        b[12..16].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&b), Err(WireError::LengthMismatch(_))));
    }

    #[test]
    fn encode_rejects_oversize_before_output() {
        let msg = WireMessage::new(
            0,
            "cam",
            Body::StreamFrame {
                stream_id: 0,
                seq: 0,
                data: vec![0; MAX_PAYLOAD],
            },
        );
        assert!(matches!(encode(&msg), Err(WireError::PayloadTooLarge(_))));
        let long = "x".repeat(256);
        assert!(matches!(
            encode(&WireMessage::pose(0, long, Pose::IDENTITY)),
            Err(WireError::FrameIdTooLong(256))
        ));
        let mut hb = WireMessage::heartbeat(0);
        hb.frame_id = "x".into();
        assert!(encode(&hb).is_err());
    }

    #[test]
    fn read_frame_from_stream() {
        let mut buf = encode(&WireMessage::twist(1, 1.0, 0.0)).unwrap();
        buf.extend(encode(&WireMessage::heartbeat(2)).unwrap());
        let mut r = std::io::Cursor::new(buf);
        assert_eq!(
            read_frame(&mut r).unwrap().unwrap().0.msg_type(),
            MsgType::Twist
        );
        assert_eq!(
            read_frame(&mut r).unwrap().unwrap().0,
            WireMessage::heartbeat(2)
        );
        assert!(read_frame(&mut r).unwrap().is_none());
        let mut partial = std::io::Cursor::new(vec![b'A', b'S']);
        assert!(matches!(
            read_frame(&mut partial),
            Err(WireError::Truncated { .. })
        ));
    }

    #[test]
    fn msg_type_codes() {
        for (i, t) in MsgType::ALL.iter().enumerate() {
            assert_eq!(*t as u8, i as u8 + 1);
            assert_eq!(MsgType::from_u8(i as u8 + 1).unwrap(), *t);
        }
        assert!(MsgType::from_u8(0).is_err());
        assert!(MsgType::from_u8(10).is_err());
    }
}
