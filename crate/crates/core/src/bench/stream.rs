//! Loopback streaming benchmark: framed TCP versus chunked UDP datagrams.

use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::net::{TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::udp::{BatchReceiver, BatchSender};
use super::{median, BenchError, BenchReport};
use crate::wire::{
    chunk_with_limit, encode, monotonic_ns, read_frame, Body, Meter, Reassembler, ReassemblyEvent,
    WireMessage, DATAGRAM_HEADER_LEN, MAX_CHUNK_PAYLOAD,
};

/// Webcam frame rates from the original field tests, in test order.
pub const REFERENCE_STREAM_FPS: [f64; 7] = [7.0, 7.0, 6.0, 8.0, 7.0, 30.0, 30.0];
/// Webcam latencies in seconds from the same tests.
pub const REFERENCE_STREAM_LATENCY_S: [f64; 7] = [2.95, 2.95, 4.85, 3.65, 3.55, 0.65, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamTransport {
    /// One framed message per frame over a default TCP socket, flushed after
    /// every message.
    NaivePerMessage,
    /// Frames split into timestamped datagrams over UDP, sent as one batch
    /// per frame.
    ChunkedDatagram,
}

impl StreamTransport {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NaivePerMessage => "naive_per_message",
            Self::ChunkedDatagram => "chunked_datagram",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamBenchConfig {
    pub payload_bytes: usize,
    pub rate_hz: f64,
    pub duration_s: f64,
    pub transport: StreamTransport,
    pub seed: u64,
    pub chunk_bytes: usize,
    /// Sliding window for the fps readout.
    pub fps_window_s: f64,
    pub reassembly_timeout_ms: u64,
    /// Requested receive buffer for the datagram socket. The kernel may cap
    /// it (`net.core.rmem_max` on Linux).
    pub udp_recv_buffer_bytes: usize,
    /// Batch each frame's datagrams through kernel segmentation and receive
    /// coalescing where the platform has them.
    pub udp_offload: bool,
}

impl Default for StreamBenchConfig {
    /// 200 KiB frames at 30 Hz for 5 s.
    fn default() -> Self {
        Self {
            payload_bytes: 200 * 1024,
            rate_hz: 30.0,
            duration_s: 5.0,
            transport: StreamTransport::ChunkedDatagram,
            seed: 1,
            chunk_bytes: MAX_CHUNK_PAYLOAD,
            fps_window_s: 1.0,
            reassembly_timeout_ms: 200,
            udp_recv_buffer_bytes: 4 * 1024 * 1024,
            udp_offload: true,
        }
    }
}

/// What the consumer saw: `(seq, send_ts_ns, recv_ts_ns)` per frame.
type Arrivals = Vec<(u32, u64, u64)>;

struct Consumer {
    done: Arc<AtomicBool>,
    handle: JoinHandle<Result<Arrivals, BenchError>>,
}

fn spawn_tcp_consumer(listener: TcpListener, payload_bytes: usize) -> Consumer {
    let done = Arc::new(AtomicBool::new(false));
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept()?;
        let mut r = BufReader::with_capacity(payload_bytes.max(8192) + 64, stream);
        let mut out = Vec::new();
        while let Some((m, _)) = read_frame(&mut r)? {
            let recv = monotonic_ns();
            if let Body::StreamFrame { seq, data, .. } = &m.body {
                if data.len() == payload_bytes {
                    out.push((*seq, m.timestamp_ns, recv));
                }
            }
        }
        Ok(out)
    });
    Consumer { done, handle }
}

fn spawn_udp_consumer(rx: BatchReceiver, payload_bytes: usize, timeout_ms: u64) -> Consumer {
    let done = Arc::new(AtomicBool::new(false));
    let flag = done.clone();
    let mut rx = rx;
    let handle = std::thread::spawn(move || {
        rx.socket()
            .set_read_timeout(Some(Duration::from_millis(5)))?;
        let mut reasm = Reassembler::new(timeout_ms);
        let mut out = Vec::new();
        let mut idle_since: Option<Instant> = None;
        loop {
            let mut received = false;
            let result = rx.recv(|d| {
                received = true;
                let now = monotonic_ns();
                for ev in reasm.push_bytes(d, now) {
                    if let ReassemblyEvent::Delivered {
                        seq,
                        send_ts_ns,
                        payload,
                        ..
                    } = ev
                    {
                        if payload.len() == payload_bytes {
                            out.push((seq, send_ts_ns, now));
                        }
                    }
                }
            });
            match result {
                Ok(()) if received => idle_since = None,
                Ok(()) => {}
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    reasm.poll(monotonic_ns());
                    if flag.load(Ordering::SeqCst) {
                        let since = *idle_since.get_or_insert_with(Instant::now);
                        if since.elapsed() > Duration::from_millis(timeout_ms + 100) {
                            break;
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    });
    Consumer { done, handle }
}

/// Streams synthetic frames between two threads over loopback and meters
/// what arrives. Frame `k` is due at `k / rate_hz`; a late producer sends
/// immediately rather than skipping. Samples are per-frame latencies in
/// seconds; `fps` is the median sliding-window rate once a full window has
/// elapsed.
pub fn bench_stream(cfg: &StreamBenchConfig) -> Result<BenchReport, BenchError> {
    if !(cfg.rate_hz > 0.0) || !(cfg.duration_s > 0.0) || !(cfg.fps_window_s > 0.0) {
        return Err(BenchError::InvalidConfig(
            "rate, duration and fps window must be positive".into(),
        ));
    }
    if cfg.chunk_bytes == 0 || cfg.chunk_bytes > MAX_CHUNK_PAYLOAD {
        return Err(BenchError::InvalidConfig(format!(
            "chunk_bytes must be in 1..={MAX_CHUNK_PAYLOAD}"
        )));
    }
    let frames = ((cfg.duration_s * cfg.rate_hz) + 1e-9).floor().max(1.0) as u32;
    let mut payload = vec![0u8; cfg.payload_bytes];
    ChaCha8Rng::seed_from_u64(cfg.seed).fill_bytes(&mut payload);
    let period = Duration::from_secs_f64(1.0 / cfg.rate_hz);

    let run_start = Instant::now();
    let mut offload = (false, false);
    let arrivals = match cfg.transport {
        StreamTransport::NaivePerMessage => {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let consumer = spawn_tcp_consumer(listener, cfg.payload_bytes);
            let mut w = BufWriter::new(TcpStream::connect(addr)?);
            let start = Instant::now();
            for seq in 0..frames {
                pace(start + period * seq);
                let msg = WireMessage::new(
                    monotonic_ns(),
                    "camera",
                    Body::StreamFrame {
                        stream_id: 0,
                        seq,
                        data: payload.clone(),
                    },
                );
                w.write_all(&encode(&msg)?)?;
                w.flush()?;
            }
            drop(w);
            consumer.done.store(true, Ordering::SeqCst);
            consumer.handle.join().expect("consumer thread")?
        }
        StreamTransport::ChunkedDatagram => {
            let rx = UdpSocket::bind("127.0.0.1:0")?;
            let rx = {
                let sock = socket2::Socket::from(rx);
                sock.set_recv_buffer_size(cfg.udp_recv_buffer_bytes)?;
                UdpSocket::from(sock)
            };
            let tx = UdpSocket::bind("127.0.0.1:0")?;
            tx.connect(rx.local_addr()?)?;
            let segment = DATAGRAM_HEADER_LEN + cfg.chunk_bytes;
            let mut tx = BatchSender::new(tx, segment, cfg.udp_offload);
            let rx = BatchReceiver::new(rx, cfg.udp_offload);
            offload = (tx.offloaded(), rx.offloaded());
            let consumer = spawn_udp_consumer(rx, cfg.payload_bytes, cfg.reassembly_timeout_ms);
            let start = Instant::now();
            let mut wire = Vec::new();
            let mut one = Vec::with_capacity(segment);
            for seq in 0..frames {
                pace(start + period * seq);
                wire.clear();
                for d in chunk_with_limit(&payload, 0, seq, monotonic_ns(), cfg.chunk_bytes)? {
                    d.encode_into(&mut one);
                    wire.extend_from_slice(&one);
                }
                tx.send_frame(&wire, segment)?;
            }
            consumer.done.store(true, Ordering::SeqCst);
            consumer.handle.join().expect("consumer thread")?
        }
    };
    let elapsed = run_start.elapsed().as_secs_f64();
    if arrivals.is_empty() {
        return Err(BenchError::NoData);
    }

    let mut meter = Meter::new(cfg.fps_window_s);
    let mut fps_samples = Vec::new();
    let window_ns = (cfg.fps_window_s * 1e9) as u64;
    let first_recv = arrivals[0].2;
    for &(seq, send, recv) in &arrivals {
        meter.record(seq, send, recv);
        if recv - first_recv >= window_ns {
            fps_samples.push(meter.stats().fps);
        }
    }
    let stats = meter.stats();
    let fps = if fps_samples.is_empty() {
        // shorter than one window: average rate over the run
        let span = (arrivals.last().expect("non-empty").2 - first_recv) as f64 * 1e-9;
        if span > 0.0 {
            (arrivals.len() - 1) as f64 / span
        } else {
            0.0
        }
    } else {
        median(&fps_samples)
    };
    let lost = frames as usize - arrivals.len();
    let latencies: Vec<f64> = arrivals
        .iter()
        .map(|&(_, s, r)| r.saturating_sub(s) as f64 * 1e-9)
        .collect();

    let mut report = BenchReport::from_samples(
        format!("stream_{}", cfg.transport.name()),
        json!(cfg),
        cfg.seed,
        "latency_s",
        latencies,
        elapsed,
    )?;
    report.metrics.insert("fps".into(), fps);
    report
        .metrics
        .insert("latency_mean_s".into(), stats.latency_mean_s);
    report
        .metrics
        .insert("latency_p95_s".into(), stats.latency_p95_s);
    report
        .metrics
        .insert("loss_fraction".into(), lost as f64 / frames as f64);
    report.metrics.insert("frames_sent".into(), frames as f64);
    if cfg.transport == StreamTransport::ChunkedDatagram {
        report
            .metrics
            .insert("udp_offload_send".into(), offload.0 as u8 as f64);
        report
            .metrics
            .insert("udp_offload_recv".into(), offload.1 as u8 as f64);
    }
    report
        .metrics
        .insert("frames_received".into(), arrivals.len() as f64);
    Ok(report)
}

fn pace(due: Instant) {
    if let Some(wait) = due.checked_duration_since(Instant::now()) {
        std::thread::sleep(wait);
    }
}

/// Side-by-side text table of measured runs and the reference series.
pub fn reference_table(naive: &BenchReport, chunked: &BenchReport) -> String {
    let mut s = String::new();
    s.push_str("transport isolation only: payloads are opaque bytes, no camera or codec\n");
    s.push_str(&format!(
        "{:<22} {:>10} {:>16}\n",
        "series", "fps", "latency_mean_s"
    ));
    for r in [naive, chunked] {
        s.push_str(&format!(
            "{:<22} {:>10.2} {:>16.6}\n",
            r.bench.trim_start_matches("stream_"),
            r.metric("fps").unwrap_or(f64::NAN),
            r.metric("latency_mean_s").unwrap_or(f64::NAN)
        ));
    }
    s.push_str("reference field tests (1-5 per-message, 6-7 batched UDP):\n");
    for (i, (f, l)) in REFERENCE_STREAM_FPS
        .iter()
        .zip(REFERENCE_STREAM_LATENCY_S)
        .enumerate()
    {
        s.push_str(&format!(
            "{:<22} {:>10.2} {:>16.2}\n",
            format!("test {}", i + 1),
            f,
            l
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_payload_both_transports() {
        for transport in [
            StreamTransport::NaivePerMessage,
            StreamTransport::ChunkedDatagram,
        ] {
            let r = bench_stream(&StreamBenchConfig {
                payload_bytes: 64,
                rate_hz: 100.0,
                duration_s: 0.3,
                transport,
                ..Default::default()
            })
            .unwrap();
            assert_eq!(r.metric("frames_sent"), Some(30.0));
            assert!(r.metric("frames_received").unwrap() >= 29.0);
            assert!(r.min >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(bench_stream(&StreamBenchConfig {
            rate_hz: 0.0,
            ..Default::default()
        })
        .is_err());
    }
}
