//! Frame-rate, latency and loss metering for received streams.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    /// Frames received in the window ending at the latest arrival, per second.
    pub fps: f64,
    pub latency_mean_s: f64,
    /// Nearest-rank 95th percentile.
    pub latency_p95_s: f64,
    pub loss_fraction: f64,
    pub frames: u64,
}

/// Single-writer accumulator; [`Meter::stats`] returns a snapshot copy.
/// The fps window is `(latest - window, latest]`. Latency statistics cover
/// every recorded frame. Loss is `1 - distinct / (max_seq - min_seq + 1)`.
#[derive(Debug, Clone)]
pub struct Meter {
    window_ns: u64,
    recent: VecDeque<u64>,
    latest_recv_ns: Option<u64>,
    latencies_ns: Vec<u64>,
    seqs: BTreeSet<u32>,
}

impl Meter {
    pub fn new(window_s: f64) -> Self {
        let window_ns = (window_s.max(1e-9) * 1e9).round() as u64;
        Self {
            window_ns,
            recent: VecDeque::new(),
            latest_recv_ns: None,
            latencies_ns: Vec::new(),
            seqs: BTreeSet::new(),
        }
    }

    pub fn record(&mut self, seq: u32, send_ts_ns: u64, recv_ts_ns: u64) {
        self.seqs.insert(seq);
        self.latencies_ns
            .push(recv_ts_ns.saturating_sub(send_ts_ns));
        let latest = self
            .latest_recv_ns
            .map_or(recv_ts_ns, |l| l.max(recv_ts_ns));
        self.latest_recv_ns = Some(latest);
        self.recent.push_back(recv_ts_ns);
        let cutoff = latest.saturating_sub(self.window_ns);
        let in_window = |t: u64| t > cutoff || (latest < self.window_ns);
        self.recent.retain(|&t| in_window(t));
    }

    pub fn stats(&self) -> StreamStats {
        let n = self.latencies_ns.len();
        if n == 0 {
            return StreamStats::default();
        }
        let mean = self.latencies_ns.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
        let mut sorted = self.latencies_ns.clone();
        sorted.sort_unstable();
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        let min = *self.seqs.first().expect("non-empty") as f64;
        let max = *self.seqs.last().expect("non-empty") as f64;
        let loss = 1.0 - self.seqs.len() as f64 / (max - min + 1.0);
        StreamStats {
            fps: self.recent.len() as f64 / (self.window_ns as f64 * 1e-9),
            latency_mean_s: mean * 1e-9,
            latency_p95_s: sorted[rank - 1] as f64 * 1e-9,
            loss_fraction: loss.clamp(0.0, 1.0),
            frames: n as u64,
        }
    }
}

/// Meters a batch of `(seq, send_ts_ns, recv_ts_ns)` events.
pub fn meter(events: &[(u32, u64, u64)], window_s: f64) -> StreamStats {
    let mut m = Meter::new(window_s);
    for &(seq, s, r) in events {
        m.record(seq, s, r);
    }
    m.stats()
}
