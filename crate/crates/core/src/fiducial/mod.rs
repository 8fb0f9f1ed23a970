//! Tag-based zero-point initialization and observation noise models.

mod experiment;

pub use experiment::{
    default_tag_configs, run_averaging_experiment, ErrorStats, ExperimentReport,
    ExperimentSettings, Mount, ReportRow, TagTestConfig, CSV_HEADER,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    average_positions, average_rotations, invert_rigid, GeometryError, Pose, UnitQuaternion, Vec3,
};

#[derive(Debug, Error, PartialEq)]
pub enum FiducialError {
    #[error("observation of tag {observed} cannot use extrinsic of tag {expected}")]
    TagMismatch { observed: u32, expected: u32 },
    #[error("observation window is empty")]
    EmptyWindow,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A sighting of one tag, expressed in the viewing device's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagObservation {
    pub tag_id: u32,
    pub pose_device_tag: Pose,
    pub timestamp_ns: u64,
}

/// Where a tag is mounted on the robot body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagExtrinsic {
    pub tag_id: u32,
    pub pose_robot_tag: Pose,
}

/// Shared world origin anchored at the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub pose_world_robot: Pose,
    pub source_count: usize,
}

/// `world_T_robot = world_T_device · device_T_tag · (robot_T_tag)⁻¹`.
pub fn initialize_zero_point(
    obs: &TagObservation,
    ext: &TagExtrinsic,
    device_in_world: &Pose,
) -> Result<ZeroPoint, FiducialError> {
    if obs.tag_id != ext.tag_id {
        return Err(FiducialError::TagMismatch {
            observed: obs.tag_id,
            expected: ext.tag_id,
        });
    }
    let pose_world_robot = device_in_world
        .compose(&obs.pose_device_tag)
        .compose(&invert_rigid(&ext.pose_robot_tag));
    Ok(ZeroPoint {
        pose_world_robot,
        source_count: 1,
    })
}

/// The exact observation a device at `device_in_world` would make of a tag
/// mounted with `ext` on a robot at `world_robot`.
pub fn exact_observation(
    world_robot: &Pose,
    ext: &TagExtrinsic,
    device_in_world: &Pose,
    timestamp_ns: u64,
) -> TagObservation {
    let world_tag = world_robot.compose(&ext.pose_robot_tag);
    TagObservation {
        tag_id: ext.tag_id,
        pose_device_tag: invert_rigid(device_in_world).compose(&world_tag),
        timestamp_ns,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Device on a stand: i.i.d. noise only.
    Static,
    /// Device held by hand: i.i.d. noise plus a random-walk drift of the
    /// true relative pose.
    Handheld,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Per-axis position noise, meters.
    pub sigma_pos: f64,
    /// Per-axis rotation-vector noise, radians.
    pub sigma_rot: f64,
    /// Per-axis drift increment per sample, meters (handheld only).
    pub drift_step_pos: f64,
    /// Per-axis drift increment per sample, radians (handheld only).
    pub drift_step_rot: f64,
    pub seed: u64,
}

/// Distance at which the default sigmas apply.
pub const REFERENCE_DISTANCE_M: f64 = 0.25;

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            kind: NoiseKind::Static,
            sigma_pos: 0.0,
            sigma_rot: 0.0,
            drift_step_pos: 0.0,
            drift_step_rot: 0.0,
            seed,
        }
    }

    /// 2 mm / 0.2° at 0.25 m, scaled linearly with distance.
    pub fn static_default(distance_m: f64, seed: u64) -> Self {
        let k = distance_m / REFERENCE_DISTANCE_M;
        Self {
            kind: NoiseKind::Static,
            sigma_pos: 0.002 * k,
            sigma_rot: 0.2f64.to_radians() * k,
            drift_step_pos: 0.0,
            drift_step_rot: 0.0,
            seed,
        }
    }

    /// 8 mm / 0.8° noise and 0.5 mm / 0.05° drift per sample at 0.25 m,
    /// all scaled linearly with distance.
    pub fn handheld_default(distance_m: f64, seed: u64) -> Self {
        let k = distance_m / REFERENCE_DISTANCE_M;
        Self {
            kind: NoiseKind::Handheld,
            sigma_pos: 0.008 * k,
            sigma_rot: 0.8f64.to_radians() * k,
            drift_step_pos: 0.0005 * k,
            drift_step_rot: 0.05f64.to_radians() * k,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), FiducialError> {
        let vals = [
            self.sigma_pos,
            self.sigma_rot,
            self.drift_step_pos,
            self.drift_step_rot,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FiducialError::InvalidNoise(format!(
                "sigmas and drift steps must be finite and >= 0: {vals:?}"
            )));
        }
        Ok(())
    }
}

fn perturb(pose: &Pose, dp: Vec3, dr: Vec3) -> Pose {
    let translation = if dp == Vec3::ZERO {
        pose.translation
    } else {
        pose.translation + dp
    };
    let rotation = if dr == Vec3::ZERO {
        pose.rotation
    } else {
        pose.rotation * UnitQuaternion::from_rotation_vector(dr)
    };
    Pose::new(translation, rotation)
}

/// Stateful per-sample noise source for a [`NoiseModel`].
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    model: NoiseModel,
    rng: ChaCha8Rng,
    noise_pos: Normal<f64>,
    noise_rot: Normal<f64>,
    step_pos: Normal<f64>,
    step_rot: Normal<f64>,
    drift_pos: Vec3,
    drift_rot: Vec3,
}

impl NoiseSampler {
    pub fn new(model: NoiseModel) -> Result<Self, FiducialError> {
        model.validate()?;
        let normal =
            |s: f64| Normal::new(0.0, s).map_err(|e| FiducialError::InvalidNoise(e.to_string()));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            noise_pos: normal(model.sigma_pos)?,
            noise_rot: normal(model.sigma_rot)?,
            step_pos: normal(model.drift_step_pos)?,
            step_rot: normal(model.drift_step_rot)?,
            drift_pos: Vec3::ZERO,
            drift_rot: Vec3::ZERO,
            model,
        })
    }

    fn draw(&mut self, d: Normal<f64>, sigma: f64) -> Vec3 {
        if sigma == 0.0 {
            return Vec3::ZERO;
        }
        Vec3::new(
            d.sample(&mut self.rng),
            d.sample(&mut self.rng),
            d.sample(&mut self.rng),
        )
    }

    /// Advances one sample. Returns `(observed, true_now)`: the true relative
    /// pose includes handheld drift, the observation adds i.i.d. noise on top.
    pub fn next(&mut self, nominal: &Pose) -> (Pose, Pose) {
        if self.model.kind == NoiseKind::Handheld {
            let dp = self.draw(self.step_pos, self.model.drift_step_pos);
            let dr = self.draw(self.step_rot, self.model.drift_step_rot);
            self.drift_pos += dp;
            self.drift_rot += dr;
        }
        let true_now = perturb(nominal, self.drift_pos, self.drift_rot);
        let np = self.draw(self.noise_pos, self.model.sigma_pos);
        let nr = self.draw(self.noise_rot, self.model.sigma_rot);
        (perturb(&true_now, np, nr), true_now)
    }
}

/// Observations plus the true relative pose at each sample instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStream {
    pub observations: Vec<TagObservation>,
    pub truth: Vec<Pose>,
}

fn sample_count(rate_hz: f64, duration_s: f64) -> Result<usize, FiducialError> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) || !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(FiducialError::InvalidSampling(format!(
            "rate {rate_hz} Hz, duration {duration_s} s"
        )));
    }
    // tolerate products like 0.1 * 30 landing just under an integer
    Ok((rate_hz * duration_s + 1e-9).floor() as usize)
}

/// `floor(rate_hz · duration_s)` noisy sightings of tag 0 around `truth`,
/// with the true (drifted) pose for each.
pub fn synthesize_stream(
    truth: &Pose,
    model: &NoiseModel,
    rate_hz: f64,
    duration_s: f64,
) -> Result<ObservationStream, FiducialError> {
    let n = sample_count(rate_hz, duration_s)?;
    let mut sampler = NoiseSampler::new(*model)?;
    let period_ns = 1e9 / rate_hz;
    let mut observations = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    for k in 0..n {
        let (obs, now) = sampler.next(truth);
        observations.push(TagObservation {
            tag_id: 0,
            pose_device_tag: obs,
            timestamp_ns: (k as f64 * period_ns).round() as u64,
        });
        truths.push(now);
    }
    Ok(ObservationStream {
        observations,
        truth: truths,
    })
}

pub fn synthesize_observations(
    truth: &Pose,
    model: &NoiseModel,
    rate_hz: f64,
    duration_s: f64,
) -> Result<Vec<TagObservation>, FiducialError> {
    Ok(synthesize_stream(truth, model, rate_hz, duration_s)?.observations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStrategy {
    /// Use only the newest observation.
    SingleFrame,
    /// Average every observation in the window.
    AverageAll,
}

impl EstimateStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SingleFrame => "single_frame",
            Self::AverageAll => "average_all",
        }
    }
}

pub fn estimate_pose(
    window: &[TagObservation],
    strategy: EstimateStrategy,
) -> Result<Pose, FiducialError> {
    let last = window.last().ok_or(FiducialError::EmptyWindow)?;
    match strategy {
        EstimateStrategy::SingleFrame => Ok(last.pose_device_tag),
        EstimateStrategy::AverageAll => {
            if window.len() == 1 {
                return Ok(last.pose_device_tag);
            }
            let positions: Vec<Vec3> = window
                .iter()
                .map(|o| o.pose_device_tag.translation)
                .collect();
            let rotations: Vec<UnitQuaternion> =
                window.iter().map(|o| o.pose_device_tag.rotation).collect();
            Ok(Pose::new(
                average_positions(&positions)?,
                average_rotations(&rotations)?,
            ))
        }
    }
}
