//! Timestamped datagram chunking for the streaming path.
//!
//! ```text
//! 0  magic        "ASAD"
//! 4  stream_id    u16
//! 6  seq          u32
//! 10 send_ts      u64  sender clock, ns
//! 18 chunk_index  u16
//! 20 chunk_total  u16
//! 22 payload      ≤ 1400 bytes
//! ```

use std::collections::{BTreeMap, HashMap};

use super::WireError;

pub const DATAGRAM_MAGIC: [u8; 4] = *b"ASAD";
pub const DATAGRAM_HEADER_LEN: usize = 22;
pub const MAX_CHUNK_PAYLOAD: usize = 1400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub stream_id: u16,
    pub seq: u32,
    pub send_ts_ns: u64,
    pub chunk_index: u16,
    pub chunk_total: u16,
    pub payload: Vec<u8>,
}

impl Datagram {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(DATAGRAM_HEADER_LEN + self.payload.len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.clear();
        out.extend_from_slice(&DATAGRAM_MAGIC);
        out.extend_from_slice(&self.stream_id.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.send_ts_ns.to_le_bytes());
        out.extend_from_slice(&self.chunk_index.to_le_bytes());
        out.extend_from_slice(&self.chunk_total.to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses one datagram. Payloads up to `max_payload` bytes are accepted.
    pub fn decode_with_limit(b: &[u8], max_payload: usize) -> Result<Self, WireError> {
        if b.len() < DATAGRAM_HEADER_LEN {
            return Err(WireError::Truncated {
                needed: DATAGRAM_HEADER_LEN,
                available: b.len(),
            });
        }
        let magic = [b[0], b[1], b[2], b[3]];
        if magic != DATAGRAM_MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        let u16_at = |o: usize| u16::from_le_bytes([b[o], b[o + 1]]);
        let chunk_index = u16_at(18);
        let chunk_total = u16_at(20);
        if chunk_index >= chunk_total {
            return Err(WireError::Datagram(format!(
                "chunk index {chunk_index} not below total {chunk_total}"
            )));
        }
        let payload = &b[DATAGRAM_HEADER_LEN..];
        if payload.len() > max_payload {
            return Err(WireError::Datagram(format!(
                "chunk payload of {} bytes exceeds {max_payload}",
                payload.len()
            )));
        }
        Ok(Self {
            stream_id: u16_at(4),
            seq: u32::from_le_bytes(b[6..10].try_into().expect("4 bytes")),
            send_ts_ns: u64::from_le_bytes(b[10..18].try_into().expect("8 bytes")),
            chunk_index,
            chunk_total,
            payload: payload.to_vec(),
        })
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        Self::decode_with_limit(b, MAX_CHUNK_PAYLOAD)
    }
}

/// Splits a frame into datagrams of at most `max_chunk` payload bytes. An
/// empty frame becomes a single empty chunk.
pub fn chunk_with_limit(
    payload: &[u8],
    stream_id: u16,
    seq: u32,
    now_ns: u64,
    max_chunk: usize,
) -> Result<Vec<Datagram>, WireError> {
    if max_chunk == 0 {
        return Err(WireError::Datagram("chunk size must be at least 1".into()));
    }
    let total = payload.len().div_ceil(max_chunk).max(1);
    if total > u16::MAX as usize {
        return Err(WireError::PayloadTooLarge(payload.len()));
    }
    let mk = |i: usize, data: &[u8]| Datagram {
        stream_id,
        seq,
        send_ts_ns: now_ns,
        chunk_index: i as u16,
        chunk_total: total as u16,
        payload: data.to_vec(),
    };
    if payload.is_empty() {
        return Ok(vec![mk(0, &[])]);
    }
    Ok(payload
        .chunks(max_chunk)
        .enumerate()
        .map(|(i, c)| mk(i, c))
        .collect())
}

/// [`chunk_with_limit`] with the 1400-byte default.
pub fn chunk_stream_frame(
    payload: &[u8],
    stream_id: u16,
    seq: u32,
    now_ns: u64,
) -> Result<Vec<Datagram>, WireError> {
    chunk_with_limit(payload, stream_id, seq, now_ns, MAX_CHUNK_PAYLOAD)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReassemblyEvent {
    Delivered {
        stream_id: u16,
        seq: u32,
        send_ts_ns: u64,
        payload: Vec<u8>,
    },
    /// `count` consecutive frames from `first_seq` on were given up.
    Lost {
        stream_id: u16,
        first_seq: u32,
        count: u32,
    },
}

#[derive(Debug)]
struct Partial {
    first_seen_ns: u64,
    send_ts_ns: u64,
    total: u16,
    chunks: BTreeMap<u16, Vec<u8>>,
}

impl Partial {
    fn is_complete(&self) -> bool {
        self.chunks.len() == self.total as usize
    }
}

#[derive(Debug, Default)]
struct StreamState {
    next_seq: Option<u32>,
    frames: BTreeMap<u32, Partial>,
}

/// Counters kept by a [`Reassembler`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReassemblyCounters {
    pub delivered: u64,
    pub lost: u64,
    pub duplicates: u64,
    pub stale: u64,
    pub malformed: u64,
}

/// Rebuilds frames from datagrams that may be reordered, duplicated or
/// missing. Frames come out once each, in sequence order per stream. A
/// sequence gap blocks delivery until it fills or `timeout_ns` passes since
/// the receiver first learned of anything at or beyond the gap, at which
/// point the missing frame is reported lost. Chunks for frames already
/// delivered or given up are ignored.
#[derive(Debug)]
pub struct Reassembler {
    timeout_ns: u64,
    max_pending: usize,
    streams: HashMap<u16, StreamState>,
    counters: ReassemblyCounters,
}

impl Reassembler {
    pub const DEFAULT_MAX_PENDING: usize = 256;

    pub fn new(drop_incomplete_after_ms: u64) -> Self {
        Self::with_max_pending(drop_incomplete_after_ms, Self::DEFAULT_MAX_PENDING)
    }

    pub fn with_max_pending(drop_incomplete_after_ms: u64, max_pending: usize) -> Self {
        Self {
            timeout_ns: drop_incomplete_after_ms.saturating_mul(1_000_000),
            max_pending: max_pending.max(1),
            streams: HashMap::new(),
            counters: ReassemblyCounters::default(),
        }
    }

    pub fn counters(&self) -> ReassemblyCounters {
        self.counters
    }

    /// Frames buffered across all streams.
    pub fn pending(&self) -> usize {
        self.streams.values().map(|s| s.frames.len()).sum()
    }

    /// Parses and feeds raw datagram bytes. Malformed input is counted and
    /// skipped.
    pub fn push_bytes(&mut self, bytes: &[u8], now_ns: u64) -> Vec<ReassemblyEvent> {
        match Datagram::decode(bytes) {
            Ok(d) => self.push(d, now_ns),
            Err(_) => {
                self.counters.malformed += 1;
                self.poll(now_ns)
            }
        }
    }

    pub fn push(&mut self, d: Datagram, now_ns: u64) -> Vec<ReassemblyEvent> {
        if d.chunk_index >= d.chunk_total {
            self.counters.malformed += 1;
            return self.poll(now_ns);
        }
        let stream = self.streams.entry(d.stream_id).or_default();
        let next = *stream.next_seq.get_or_insert(d.seq);
        if d.seq < next {
            self.counters.stale += 1;
        } else {
            let frame = stream.frames.entry(d.seq).or_insert_with(|| Partial {
                first_seen_ns: now_ns,
                send_ts_ns: d.send_ts_ns,
                total: d.chunk_total,
                chunks: BTreeMap::new(),
            });
            if frame.total != d.chunk_total {
                self.counters.malformed += 1;
            } else if let std::collections::btree_map::Entry::Vacant(e) =
                frame.chunks.entry(d.chunk_index)
            {
                e.insert(d.payload);
            } else {
                self.counters.duplicates += 1;
            }
        }
        self.poll(now_ns)
    }

    /// Delivers whatever is ready and expires gaps older than the timeout.
    pub fn poll(&mut self, now_ns: u64) -> Vec<ReassemblyEvent> {
        let mut out = Vec::new();
        let mut ids: Vec<u16> = self.streams.keys().copied().collect();
        ids.sort_unstable();
        for id in ids {
            let stream = self.streams.get_mut(&id).expect("stream exists");
            Self::drain(
                id,
                stream,
                now_ns,
                self.timeout_ns,
                self.max_pending,
                &mut self.counters,
                &mut out,
            );
        }
        out
    }

    fn drain(
        stream_id: u16,
        s: &mut StreamState,
        now_ns: u64,
        timeout_ns: u64,
        max_pending: usize,
        counters: &mut ReassemblyCounters,
        out: &mut Vec<ReassemblyEvent>,
    ) {
        let Some(mut next) = s.next_seq else { return };
        loop {
            if s.frames.get(&next).is_some_and(Partial::is_complete) {
                let f = s.frames.remove(&next).expect("head frame");
                out.push(ReassemblyEvent::Delivered {
                    stream_id,
                    seq: next,
                    send_ts_ns: f.send_ts_ns,
                    payload: f.chunks.into_values().flatten().collect(),
                });
                counters.delivered += 1;
                match next.checked_add(1) {
                    Some(n) => next = n,
                    None => {
                        s.frames.clear();
                        break;
                    }
                }
                continue;
            }
            let Some(oldest) = s.frames.values().map(|f| f.first_seen_ns).min() else {
                break;
            };
            let expired = now_ns.saturating_sub(oldest) >= timeout_ns;
            if !expired && s.frames.len() <= max_pending {
                break;
            }
            // give up on the head and every absent frame up to the next buffered one
            s.frames.remove(&next);
            let resume = s.frames.keys().next().copied();
            let count = match resume {
                Some(r) => r - next,
                None => 1,
            };
            out.push(ReassemblyEvent::Lost {
                stream_id,
                first_seq: next,
                count,
            });
            counters.lost += count as u64;
            match resume.or_else(|| next.checked_add(1)) {
                Some(n) => next = n,
                None => break,
            }
        }
        s.next_seq = Some(next);
    }
}
