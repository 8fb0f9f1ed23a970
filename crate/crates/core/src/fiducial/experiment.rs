//! Tag pose averaging study: single-frame versus averaged estimates under
//! stand-mounted and handheld noise.
//!
//! For every configuration and seed one collection period is simulated
//! (`rate_hz · duration_s` samples). The single-frame estimator is scored on
//! every frame against the true relative pose at that instant; the averaging
//! estimator is scored once per collection, at its end, against the true pose
//! at that moment.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    estimate_pose, synthesize_stream, EstimateStrategy, FiducialError, NoiseKind, NoiseModel,
};
use crate::geometry::{Pose, UnitQuaternion, Vec3};

pub const CSV_HEADER: [&str; 12] = [
    "config_id",
    "mount",
    "distance_m",
    "strategy",
    "n_samples",
    "pos_err_mean_m",
    "pos_err_median_m",
    "pos_err_std_m",
    "rot_err_mean_rad",
    "rot_err_median_rad",
    "rot_err_std_rad",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mount {
    Stand,
    Hand,
}

impl Mount {
    pub fn name(&self) -> &'static str {
        match self {
            Mount::Stand => "stand",
            Mount::Hand => "hand",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTestConfig {
    pub config_id: u32,
    pub mount: Mount,
    pub distance_m: f64,
    /// Nominal tag pose in the device frame.
    pub truth: Pose,
    /// Seed inside is ignored; runs derive seeds from the settings.
    pub noise: NoiseModel,
}

/// Tag straight below the camera at `distance_m`, facing it.
fn overhead_pose(distance_m: f64) -> Pose {
    Pose::new(
        Vec3::new(0.0, 0.0, distance_m),
        UnitQuaternion::from_euler(PI, 0.0, 0.0),
    )
}

/// Tag at `distance_m` along a ray 35° off the optical axis, tilted to match.
fn oblique_pose(distance_m: f64) -> Pose {
    let a = 35f64.to_radians();
    Pose::new(
        Vec3::new(0.0, distance_m * a.sin(), distance_m * a.cos()),
        UnitQuaternion::from_euler(PI - a, 0.0, 0.0),
    )
}

/// The four standard configurations: stand and hand, at 0.25 m overhead and
/// at 1.25 m at an angle.
pub fn default_tag_configs() -> Vec<TagTestConfig> {
    vec![
        TagTestConfig {
            config_id: 1,
            mount: Mount::Stand,
            distance_m: 0.25,
            truth: overhead_pose(0.25),
            noise: NoiseModel::static_default(0.25, 0),
        },
        TagTestConfig {
            config_id: 2,
            mount: Mount::Stand,
            distance_m: 1.25,
            truth: oblique_pose(1.25),
            noise: NoiseModel::static_default(1.25, 0),
        },
        TagTestConfig {
            config_id: 3,
            mount: Mount::Hand,
            distance_m: 0.25,
            truth: overhead_pose(0.25),
            noise: NoiseModel::handheld_default(0.25, 0),
        },
        TagTestConfig {
            config_id: 4,
            mount: Mount::Hand,
            distance_m: 1.25,
            truth: oblique_pose(1.25),
            noise: NoiseModel::handheld_default(1.25, 0),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub rate_hz: f64,
    pub duration_s: f64,
    /// Base seed; run `i` uses `seed + i`.
    pub seed: u64,
    pub n_seeds: usize,
    pub configs: Vec<TagTestConfig>,
}

impl Default for ExperimentSettings {
    /// 60 s at 30 Hz, five seeds, the four standard configurations.
    fn default() -> Self {
        Self {
            rate_hz: 30.0,
            duration_s: 60.0,
            seed: 1,
            n_seeds: 5,
            configs: default_tag_configs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Self {
            mean,
            median,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config_id: u32,
    pub mount: Mount,
    pub distance_m: f64,
    pub strategy: EstimateStrategy,
    /// Observations per collection period.
    pub n_samples: usize,
    /// Number of scored estimates behind the statistics.
    pub n_estimates: usize,
    pub pos_err_m: ErrorStats,
    pub rot_err_rad: ErrorStats,
    /// Same rotation errors measured as the norm of the wrapped
    /// roll/pitch/yaw difference.
    pub euler_err_rad: ErrorStats,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub settings: ExperimentSettings,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, config_id: u32, strategy: EstimateStrategy) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.config_id == config_id && r.strategy == strategy)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.config_id.to_string(),
                r.mount.name().to_string(),
                r.distance_m.to_string(),
                r.strategy.name().to_string(),
                r.n_samples.to_string(),
                r.pos_err_m.mean.to_string(),
                r.pos_err_m.median.to_string(),
                r.pos_err_m.std.to_string(),
                r.rot_err_rad.mean.to_string(),
                r.rot_err_rad.median.to_string(),
                r.rot_err_rad.std.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

fn euler_error(a: &Pose, b: &Pose) -> f64 {
    let (r1, p1, y1) = a.rotation.euler_angles();
    let (r2, p2, y2) = b.rotation.euler_angles();
    Vec3::new(
        wrap_angle(r1 - r2),
        wrap_angle(p1 - p2),
        wrap_angle(y1 - y2),
    )
    .norm()
}

#[derive(Default)]
struct Errors {
    pos: Vec<f64>,
    rot: Vec<f64>,
    euler: Vec<f64>,
}

impl Errors {
    fn push(&mut self, est: &Pose, truth: &Pose) {
        self.pos.push(est.position_error(truth));
        self.rot.push(est.rotation_error(truth));
        self.euler.push(euler_error(est, truth));
    }
}

/// Mixes the run seed with the configuration so configurations draw
/// independent noise.
fn run_seed(base: u64, config_id: u32) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (config_id as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

pub fn run_averaging_experiment(
    settings: &ExperimentSettings,
) -> Result<ExperimentReport, FiducialError> {
    let mut rows = Vec::with_capacity(settings.configs.len() * 2);
    let mut n_samples = 0;
    for cfg in &settings.configs {
        let mut single = Errors::default();
        let mut averaged = Errors::default();
        for i in 0..settings.n_seeds.max(1) {
            let seed = run_seed(settings.seed.wrapping_add(i as u64), cfg.config_id);
            let model = cfg.noise.with_seed(seed);
            let stream =
                synthesize_stream(&cfg.truth, &model, settings.rate_hz, settings.duration_s)?;
            n_samples = stream.observations.len();
            for (k, truth) in stream.truth.iter().enumerate() {
                let est = estimate_pose(&stream.observations[..=k], EstimateStrategy::SingleFrame)?;
                single.push(&est, truth);
            }
            let est = estimate_pose(&stream.observations, EstimateStrategy::AverageAll)?;
            let last = stream.truth.last().ok_or(FiducialError::EmptyWindow)?;
            averaged.push(&est, last);
        }
        for (strategy, errs) in [
            (EstimateStrategy::SingleFrame, &single),
            (EstimateStrategy::AverageAll, &averaged),
        ] {
            rows.push(ReportRow {
                config_id: cfg.config_id,
                mount: cfg.mount,
                distance_m: cfg.distance_m,
                strategy,
                n_samples,
                n_estimates: errs.pos.len(),
                pos_err_m: ErrorStats::from_samples(&errs.pos),
                rot_err_rad: ErrorStats::from_samples(&errs.rot),
                euler_err_rad: ErrorStats::from_samples(&errs.euler),
                seed: settings.seed,
            });
        }
    }
    Ok(ExperimentReport {
        settings: settings.clone(),
        rows,
    })
}

impl TagTestConfig {
    pub fn is_handheld(&self) -> bool {
        self.noise.kind == NoiseKind::Handheld
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_basics() {
        let s = ErrorStats::from_samples(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 10.0);
        let s = ErrorStats::from_samples(&[2.0]);
        assert_eq!((s.mean, s.median, s.std), (2.0, 2.0, 0.0));
    }

    #[test]
    fn zero_noise_gives_zero_errors() {
        let mut settings = ExperimentSettings {
            duration_s: 2.0,
            n_seeds: 2,
            ..Default::default()
        };
        for c in &mut settings.configs {
            c.noise = NoiseModel::noiseless(0);
        }
        let report = run_averaging_experiment(&settings).unwrap();
        assert_eq!(report.rows.len(), 8);
        for r in &report.rows {
            assert!(r.pos_err_m.max < 1e-12, "{r:?}");
            assert!(r.rot_err_rad.max < 1e-7, "{r:?}");
        }
    }

    #[test]
    fn csv_has_header_and_eight_rows() {
        let settings = ExperimentSettings {
            duration_s: 1.0,
            n_seeds: 1,
            ..Default::default()
        };
        let csv = run_averaging_experiment(&settings).unwrap().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].starts_with("1,stand,0.25,single_frame,30,"));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
