//! Benchmark harness: streaming transports, render batching, tag averaging.

mod batch;
mod stream;
mod udp;

pub use batch::{bench_batch, BatchBenchConfig};
pub use stream::{
    bench_stream, reference_table, StreamBenchConfig, StreamTransport, REFERENCE_STREAM_FPS,
    REFERENCE_STREAM_LATENCY_S,
};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] crate::wire::WireError),
    #[error(transparent)]
    Cloud(#[from] crate::pointcloud::CloudError),
    #[error("no frames received")]
    NoData,
}

/// Result of one benchmark run. `config` holds the full configuration, so a
/// report is enough to rerun the same work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub bench: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Unit of `samples` and the summary statistics.
    pub unit: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub samples: Vec<f64>,
    pub n_samples: usize,
    pub median: f64,
    pub mean: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
    pub min: f64,
    pub max: f64,
    pub duration_s: f64,
    /// Additional named measurements, such as fps or loss.
    pub metrics: BTreeMap<String, f64>,
}

pub const CSV_HEADER: [&str; 11] = [
    "bench",
    "unit",
    "n_samples",
    "median",
    "mean",
    "p95",
    "min",
    "max",
    "duration_s",
    "seed",
    "metrics",
];

/// Nearest-rank percentile of unsorted samples; `q` in (0, 1].
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

impl BenchReport {
    pub fn from_samples(
        bench: impl Into<String>,
        config: serde_json::Value,
        seed: u64,
        unit: impl Into<String>,
        samples: Vec<f64>,
        duration_s: f64,
    ) -> Result<Self, BenchError> {
        if samples.is_empty() {
            return Err(BenchError::NoData);
        }
        let n = samples.len();
        Ok(Self {
            bench: bench.into(),
            config,
            seed,
            unit: unit.into(),
            median: median(&samples),
            mean: samples.iter().sum::<f64>() / n as f64,
            p95: percentile(&samples, 0.95),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n_samples: n,
            samples,
            duration_s,
            metrics: BTreeMap::new(),
        })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    /// Drops the raw samples, keeping the summary.
    pub fn without_samples(mut self) -> Self {
        self.samples.clear();
        self
    }

    /// `key=value;...` rendering of the metrics, used in the CSV column.
    pub fn metrics_field(&self) -> String {
        self.metrics
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

pub fn write_reports_csv<W: Write>(reports: &[BenchReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.bench.clone(),
            r.unit.clone(),
            r.n_samples.to_string(),
            r.median.to_string(),
            r.mean.to_string(),
            r.p95.to_string(),
            r.min.to_string(),
            r.max.to_string(),
            r.duration_s.to_string(),
            r.seed.to_string(),
            r.metrics_field(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
