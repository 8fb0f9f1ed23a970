//! Packed vertex buffers and the three submission strategies.
//!
//! Record layout (24 bytes, little-endian):
//!
//! | offset | size | field                  |
//! |--------|------|------------------------|
//! | 0      | 12   | position, 3 × f32      |
//! | 12     | 4    | rgba, 4 × u8           |
//! | 16     | 4    | size_px, f32           |
//! | 20     | 4    | zero padding           |

use std::sync::Mutex;

use super::{CloudError, ShadedPoint};

pub const RECORD_STRIDE: usize = 24;
/// Points per append call for [`BatchStrategy::Chunked`] when unspecified.
pub const DEFAULT_CHUNK: usize = 1023;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchStrategy {
    /// One append call per kept point.
    PerPoint,
    /// One append call per `n` kept points.
    Chunked(usize),
    /// The whole buffer is packed first and appended once.
    SingleBuffer,
}

impl BatchStrategy {
    pub fn name(&self) -> String {
        match self {
            Self::PerPoint => "per_point".into(),
            Self::Chunked(n) => format!("chunked_{n}"),
            Self::SingleBuffer => "single_buffer".into(),
        }
    }
}

/// Destination of packed records. Each `append` is one CPU to GPU transfer.
pub trait UploadTarget {
    fn append(&mut self, records: &[u8]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRecord {
    pub position: [f32; 3],
    pub rgba: [u8; 4],
    pub size_px: f32,
}

/// GPU-ready interleaved point buffer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenderBatch {
    bytes: Vec<u8>,
    count: usize,
}

impl RenderBatch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps a byte buffer, checking that it holds whole records.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, CloudError> {
        if !bytes.len().is_multiple_of(RECORD_STRIDE) {
            return Err(CloudError::InvalidSize(format!(
                "{} bytes is not a multiple of the {RECORD_STRIDE}-byte record",
                bytes.len()
            )));
        }
        let count = bytes.len() / RECORD_STRIDE;
        Ok(Self { bytes, count })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn records(&self) -> impl Iterator<Item = BatchRecord> + '_ {
        self.bytes.chunks_exact(RECORD_STRIDE).map(decode_record)
    }
}

impl UploadTarget for RenderBatch {
    fn append(&mut self, records: &[u8]) {
        debug_assert_eq!(records.len() % RECORD_STRIDE, 0);
        self.bytes.extend_from_slice(records);
        self.count += records.len() / RECORD_STRIDE;
    }
}

/// Models a device vertex buffer fed through a transfer queue: every append
/// copies into a persistent staging ring and records a copy command under the
/// queue lock; the commands are applied to device memory one by one on
/// [`StagedUpload::apply`].
#[derive(Debug, Default)]
pub struct StagedUpload {
    queue: Mutex<Vec<Transfer>>,
    staging: Vec<u8>,
    cursor: usize,
    device: Vec<u8>,
    transfers: usize,
}

#[derive(Debug, Clone, Copy)]
struct Transfer {
    staging_offset: usize,
    device_offset: usize,
    len: usize,
}

impl StagedUpload {
    pub fn new() -> Self {
        Self::default()
    }

    /// Executes queued transfers and returns the device buffer contents. The
    /// staging and device buffers are kept for the next frame.
    pub fn apply(&mut self) -> &[u8] {
        let queue = self.queue.get_mut().expect("upload queue poisoned");
        self.device.resize(self.cursor, 0);
        for t in queue.drain(..) {
            self.device[t.device_offset..t.device_offset + t.len]
                .copy_from_slice(&self.staging[t.staging_offset..t.staging_offset + t.len]);
        }
        self.staging.clear();
        self.cursor = 0;
        &self.device
    }

    /// Executes queued transfers and hands over the device buffer.
    pub fn finish(&mut self) -> RenderBatch {
        self.apply();
        RenderBatch::from_bytes(std::mem::take(&mut self.device)).expect("whole records")
    }

    /// Total transfers recorded since construction.
    pub fn transfers(&self) -> usize {
        self.transfers
    }
}

impl UploadTarget for StagedUpload {
    fn append(&mut self, records: &[u8]) {
        let t = Transfer {
            staging_offset: self.staging.len(),
            device_offset: self.cursor,
            len: records.len(),
        };
        self.staging.extend_from_slice(records);
        self.cursor += records.len();
        self.transfers += 1;
        self.queue.lock().expect("upload queue poisoned").push(t);
    }
}

#[inline]
fn encode_record(position: &[f32; 3], sp: &ShadedPoint) -> [u8; RECORD_STRIDE] {
    let mut out = [0u8; RECORD_STRIDE];
    out[0..4].copy_from_slice(&position[0].to_le_bytes());
    out[4..8].copy_from_slice(&position[1].to_le_bytes());
    out[8..12].copy_from_slice(&position[2].to_le_bytes());
    out[12..16].copy_from_slice(&sp.rgba);
    out[16..20].copy_from_slice(&sp.size_px.to_le_bytes());
    out
}

fn decode_record(b: &[u8]) -> BatchRecord {
    let f = |o: usize| f32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
    BatchRecord {
        position: [f(0), f(4), f(8)],
        rgba: [b[12], b[13], b[14], b[15]],
        size_px: f(16),
    }
}

/// Packs kept points into `target` using the given call pattern. Returns the
/// number of records written.
pub fn build_batch_into(
    target: &mut dyn UploadTarget,
    positions: &[[f32; 3]],
    shaded: &[ShadedPoint],
    strategy: BatchStrategy,
) -> Result<usize, CloudError> {
    build_batch_with(target, positions, shaded, strategy, &mut Vec::new())
}

/// [`build_batch_into`] packing through a reusable `scratch` buffer.
pub fn build_batch_with(
    target: &mut dyn UploadTarget,
    positions: &[[f32; 3]],
    shaded: &[ShadedPoint],
    strategy: BatchStrategy,
    scratch: &mut Vec<u8>,
) -> Result<usize, CloudError> {
    if positions.len() != shaded.len() {
        return Err(CloudError::LengthMismatch {
            positions: positions.len(),
            shaded: shaded.len(),
        });
    }
    let kept = positions.iter().zip(shaded).filter(|(_, s)| s.keep);
    let mut written = 0;
    match strategy {
        BatchStrategy::PerPoint => {
            for (p, s) in kept {
                target.append(&encode_record(p, s));
                written += 1;
            }
        }
        BatchStrategy::Chunked(n) => {
            let n = n.max(1);
            let chunk = scratch;
            chunk.clear();
            chunk.reserve(n * RECORD_STRIDE);
            let mut in_chunk = 0;
            for (p, s) in kept {
                chunk.extend_from_slice(&encode_record(p, s));
                in_chunk += 1;
                written += 1;
                if in_chunk == n {
                    target.append(chunk);
                    chunk.clear();
                    in_chunk = 0;
                }
            }
            if in_chunk > 0 {
                target.append(chunk);
            }
        }
        BatchStrategy::SingleBuffer => {
            let buf = scratch;
            buf.clear();
            buf.reserve(positions.len() * RECORD_STRIDE);
            for (p, s) in kept {
                buf.extend_from_slice(&encode_record(p, s));
                written += 1;
            }
            if !buf.is_empty() {
                target.append(buf);
            }
        }
    }
    Ok(written)
}

/// Builds a [`RenderBatch`] from positions and their shading. Points with
/// `keep == false` are left out. All strategies produce identical bytes.
pub fn build_batch(
    positions: &[[f32; 3]],
    shaded: &[ShadedPoint],
    strategy: BatchStrategy,
) -> Result<RenderBatch, CloudError> {
    let mut batch = RenderBatch::new();
    build_batch_into(&mut batch, positions, shaded, strategy)?;
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(keep: bool, v: u8) -> ShadedPoint {
        ShadedPoint {
            rgba: [v, v, v, 255],
            keep,
            size_px: 3.5,
        }
    }

    #[test]
    fn empty_input_any_strategy() {
        for s in [
            BatchStrategy::PerPoint,
            BatchStrategy::Chunked(DEFAULT_CHUNK),
            BatchStrategy::SingleBuffer,
        ] {
            let b = build_batch(&[], &[], s).unwrap();
            assert_eq!(b.count(), 0);
            assert!(b.bytes().is_empty());
        }
    }

    #[test]
    fn record_layout_is_frozen() {
        let b = build_batch(
            &[[1.0, -2.0, 0.5]],
            &[sp(true, 7)],
            BatchStrategy::SingleBuffer,
        )
        .unwrap();
        let expected: Vec<u8> = [
            &1.0f32.to_le_bytes()[..],
            &(-2.0f32).to_le_bytes(),
            &0.5f32.to_le_bytes(),
            &[7, 7, 7, 255],
            &3.5f32.to_le_bytes(),
            &[0, 0, 0, 0],
        ]
        .concat();
        assert_eq!(b.bytes(), &expected[..]);
        let r = b.records().next().unwrap();
        assert_eq!(r.position, [1.0, -2.0, 0.5]);
        assert_eq!(r.size_px, 3.5);
    }

    #[test]
    fn drops_hidden_points_and_chunks_match() {
        let pos: Vec<[f32; 3]> = (0..10).map(|i| [i as f32, 0.0, 0.0]).collect();
        let shaded: Vec<ShadedPoint> = (0..10).map(|i| sp(i % 3 != 0, i as u8)).collect();
        let a = build_batch(&pos, &shaded, BatchStrategy::PerPoint).unwrap();
        let b = build_batch(&pos, &shaded, BatchStrategy::Chunked(4)).unwrap();
        let c = build_batch(&pos, &shaded, BatchStrategy::SingleBuffer).unwrap();
        assert_eq!(a.count(), 6);
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(a.bytes().len(), 6 * RECORD_STRIDE);
    }

    #[test]
    fn staged_upload_counts_transfers() {
        let pos: Vec<[f32; 3]> = (0..2500).map(|i| [i as f32, 1.0, 2.0]).collect();
        let shaded = vec![sp(true, 1); 2500];
        let reference = build_batch(&pos, &shaded, BatchStrategy::SingleBuffer).unwrap();
        for (s, transfers) in [
            (BatchStrategy::PerPoint, 2500),
            (BatchStrategy::Chunked(1023), 3),
            (BatchStrategy::SingleBuffer, 1),
        ] {
            let mut up = StagedUpload::new();
            build_batch_into(&mut up, &pos, &shaded, s).unwrap();
            assert_eq!(up.transfers(), transfers);
            assert_eq!(up.finish(), reference);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(build_batch(&[[0.0; 3]], &[], BatchStrategy::PerPoint).is_err());
        assert!(RenderBatch::from_bytes(vec![0; 25]).is_err());
    }
}
