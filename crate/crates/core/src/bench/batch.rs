//! Render-batch submission benchmark.

use std::time::{Duration, Instant};

use serde_json::json;

use super::{BenchError, BenchReport};
use crate::geometry::{Pose, Vec3};
use crate::pointcloud::{
    build_batch_with, random_cloud, shade_into, BatchStrategy, PointSizing, ShadingMode,
    StagedUpload,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchBenchConfig {
    pub count: usize,
    /// Edge of the cube the points are drawn from, meters.
    pub extent_m: f64,
    pub duration_s: f64,
    pub strategy: BatchStrategy,
    pub seed: u64,
    pub mode: ShadingMode,
}

impl Default for BatchBenchConfig {
    /// 100 000 points in a 0.5 m cube for 5 s.
    fn default() -> Self {
        Self {
            count: 100_000,
            extent_m: 0.5,
            duration_s: 5.0,
            strategy: BatchStrategy::SingleBuffer,
            seed: 1,
            mode: ShadingMode::default_distance_ramp(),
        }
    }
}

/// Repeatedly shades the same random cloud and submits it through a
/// [`StagedUpload`] with the configured strategy. Buffers persist across
/// frames as they would in a renderer. One sample per frame, in batches per
/// second.
pub fn bench_batch(cfg: &BatchBenchConfig) -> Result<BenchReport, BenchError> {
    if !(cfg.extent_m > 0.0) || !(cfg.duration_s >= 0.0) {
        return Err(BenchError::InvalidConfig(format!(
            "extent {} and duration {} must be positive",
            cfg.extent_m, cfg.duration_s
        )));
    }
    if matches!(cfg.strategy, BatchStrategy::Chunked(0)) {
        return Err(BenchError::InvalidConfig(
            "chunk size must be at least 1".into(),
        ));
    }
    cfg.mode.validate()?;
    let cloud = random_cloud(cfg.count, cfg.extent_m, cfg.seed);
    let positions: Vec<[f32; 3]> = cloud.points().iter().map(|p| p.position).collect();
    let viewer = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
    let sizing = PointSizing::default();
    let budget = Duration::from_secs_f64(cfg.duration_s);

    let mut samples = Vec::new();
    let mut shaded = Vec::new();
    let mut scratch = Vec::new();
    let mut upload = StagedUpload::new();
    let mut records = 0;
    let mut crc = 0;
    let mut transfers = 0;
    let start = Instant::now();
    while samples.is_empty() || start.elapsed() < budget {
        let t0 = Instant::now();
        shade_into(&cloud, &cfg.mode, &viewer, 0.0, &sizing, &mut shaded);
        let before = upload.transfers();
        records = build_batch_with(&mut upload, &positions, &shaded, cfg.strategy, &mut scratch)?;
        transfers = upload.transfers() - before;
        let device = upload.apply();
        let dt = t0.elapsed().max(Duration::from_nanos(1));
        samples.push(1.0 / dt.as_secs_f64());
        if samples.len() == 1 {
            crc = crc32fast::hash(device);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let frames = samples.len();

    let config = json!({
        "count": cfg.count,
        "extent_m": cfg.extent_m,
        "duration_s": cfg.duration_s,
        "strategy": cfg.strategy.name(),
        "seed": cfg.seed,
        "mode": cfg.mode,
        "viewer_position_m": [0.0, 0.0, 1.0],
    });
    let mut report = BenchReport::from_samples(
        format!("batch_{}", cfg.strategy.name()),
        config,
        cfg.seed,
        "batches_per_s",
        samples,
        elapsed,
    )?;
    report.metrics.insert("frames".into(), frames as f64);
    report.metrics.insert("records".into(), records as f64);
    report
        .metrics
        .insert("transfers_per_batch".into(), transfers as f64);
    report.metrics.insert("batch_crc32".into(), crc as f64);
    Ok(report)
}
