//! The simulation loop: drive the robot, render its camera, observe tags.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::camera::{forward_camera_rotation, look_at, render_depth_cloud, CameraModel};
use super::robot::{normalize_angle, step_robot, RobotState};
use super::{Scene, SimError};
use crate::bridge::{BridgeClient, ClientOptions, TOPIC_TWIST};
use crate::fiducial::{NoiseModel, NoiseSampler, TagObservation};
use crate::geometry::{invert_rigid, Pose, Vec3};
use crate::pointcloud::PointCloud;
use crate::wire::{Body, Role, WireMessage};

pub const MAP_FRAME: &str = "map";
pub const OBSERVER_FRAME: &str = "observer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rate_hz: f64,
    pub camera: CameraModel,
    /// Camera pose in the robot body frame.
    pub camera_mount: Pose,
    /// Pose of the simulated viewing device that observes tags.
    pub observer: Pose,
    pub observer_camera: CameraModel,
    pub tag_noise: NoiseModel,
    pub seed: u64,
    pub start: RobotState,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rate_hz: 5.0,
            camera: CameraModel::default(),
            camera_mount: Pose::new(Vec3::new(0.15, 0.0, 0.45), forward_camera_rotation()),
            observer: look_at(Vec3::new(0.3, 2.5, 1.5), Vec3::new(1.5, 2.5, 0.3)).expect("valid"),
            observer_camera: CameraModel {
                horizontal_fov_deg: 70.0,
                cols: 640,
                rows: 480,
                max_range_m: 10.0,
                range_noise_sigma_m: 0.0,
            },
            tag_noise: NoiseModel::noiseless(0),
            seed: 1,
            start: RobotState::at(1.0, 2.5, 0.0),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "rate {} Hz must be positive",
                self.rate_hz
            )));
        }
        self.camera.validate()?;
        self.observer_camera.validate()?;
        self.tag_noise
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    pub fn period_ns(&self) -> u64 {
        (1e9 / self.rate_hz).round() as u64
    }
}

/// Constant twist for `duration_s` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleopSegment {
    pub duration_s: f64,
    pub linear: f64,
    pub angular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub points: Vec<[f64; 2]>,
    pub speed_mps: f64,
    pub max_turn_rate: f64,
    #[serde(default)]
    pub looped: bool,
}

impl Default for WaypointPlan {
    /// Through the doorway into the second room and back.
    fn default() -> Self {
        Self {
            points: vec![[6.0, 2.5], [6.5, 2.0], [1.0, 2.5]],
            speed_mps: 0.4,
            max_turn_rate: 1.0,
            looped: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    Stationary,
    Waypoints(WaypointPlan),
    Script {
        segments: Vec<TeleopSegment>,
    },
    /// Twist set from outside, usually from `robot/twist`.
    Live,
}

/// Everything the simulator emits for one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub tick: u64,
    pub timestamp_ns: u64,
    pub state: RobotState,
    pub cloud: PointCloud,
    pub tags: Vec<TagObservation>,
}

impl SimFrame {
    /// Pose, cloud and tag messages in publish order.
    pub fn messages(&self) -> Vec<WireMessage> {
        let mut out = vec![
            WireMessage::pose(self.timestamp_ns, MAP_FRAME, self.state.pose()),
            WireMessage::point_cloud(&self.cloud),
        ];
        out.extend(self.tags.iter().map(|t| {
            WireMessage::new(
                t.timestamp_ns,
                OBSERVER_FRAME,
                Body::TagObservation {
                    tag_id: t.tag_id,
                    pose: t.pose_device_tag,
                },
            )
        }));
        out
    }
}

enum TagMount {
    World(Pose),
    Robot(Pose),
}

struct TagTrack {
    id: u32,
    mount: TagMount,
    sampler: NoiseSampler,
}

/// Deterministic simulator. Identical scene, config, drive and inputs give
/// bit-identical frames.
pub struct Simulator {
    scene: Scene,
    config: SimConfig,
    drive: Drive,
    state: RobotState,
    tick: u64,
    waypoint: usize,
    live_twist: (f64, f64),
    tags: Vec<TagTrack>,
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Simulator {
    pub fn new(scene: Scene, config: SimConfig, drive: Drive) -> Result<Self, SimError> {
        scene.validate()?;
        config.validate()?;
        if let Drive::Waypoints(p) = &drive {
            if p.points.is_empty() || !(p.speed_mps >= 0.0) || !(p.max_turn_rate > 0.0) {
                return Err(SimError::InvalidConfig(
                    "waypoint plan needs points, speed >= 0 and turn rate > 0".into(),
                ));
            }
        }
        let mut tags = Vec::new();
        let mounts = scene
            .tags
            .iter()
            .map(|t| (t.id, TagMount::World(t.pose())))
            .chain(
                scene
                    .robot_tags
                    .iter()
                    .map(|t| (t.id, TagMount::Robot(t.pose()))),
            );
        for (id, mount) in mounts {
            let model = config
                .tag_noise
                .with_seed(mix_seed(config.tag_noise.seed, id as u64 + 1));
            let sampler =
                NoiseSampler::new(model).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            tags.push(TagTrack { id, mount, sampler });
        }
        Ok(Self {
            state: config.start,
            scene,
            config,
            drive,
            tick: 0,
            waypoint: 0,
            live_twist: (0.0, 0.0),
            tags,
        })
    }

    pub fn state(&self) -> RobotState {
        self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn drive(&self) -> &Drive {
        &self.drive
    }

    /// Twist used by [`Drive::Live`] from the next tick on.
    pub fn set_twist(&mut self, linear: f64, angular: f64) {
        if linear.is_finite() && angular.is_finite() {
            self.live_twist = (linear, angular);
        }
    }

    fn command(&mut self, t_s: f64) -> (f64, f64) {
        match &self.drive {
            Drive::Stationary => (0.0, 0.0),
            Drive::Live => self.live_twist,
            Drive::Script { segments } => {
                let mut start = 0.0;
                for s in segments {
                    if t_s < start + s.duration_s {
                        return (s.linear, s.angular);
                    }
                    start += s.duration_s;
                }
                (0.0, 0.0)
            }
            Drive::Waypoints(plan) => {
                let n = plan.points.len();
                let pos = self.state.position;
                loop {
                    if self.waypoint >= n {
                        if !plan.looped {
                            return (0.0, 0.0);
                        }
                        self.waypoint = 0;
                    }
                    let [gx, gy] = plan.points[self.waypoint];
                    let (dx, dy) = (gx - pos.x, gy - pos.y);
                    if dx.hypot(dy) < 0.1 {
                        self.waypoint += 1;
                        if n == 1 && plan.looped {
                            return (0.0, 0.0);
                        }
                        continue;
                    }
                    let err = normalize_angle(dy.atan2(dx) - self.state.heading);
                    let w = (2.0 * err).clamp(-plan.max_turn_rate, plan.max_turn_rate);
                    let v = plan.speed_mps * err.cos().max(0.0);
                    return (v, w);
                }
            }
        }
    }

    /// Advances to the next tick and renders it. Tick 0 is the start state.
    pub fn tick(&mut self) -> Result<SimFrame, SimError> {
        let period = self.config.period_ns();
        if self.tick > 0 {
            let t_prev = ((self.tick - 1) * period) as f64 * 1e-9;
            let (v, w) = self.command(t_prev);
            self.state = step_robot(&self.state, v, w, period as f64 * 1e-9)?;
        }
        let ts = self.tick * period;
        let robot = self.state.pose();
        let camera = robot.compose(&self.config.camera_mount);
        let cloud = render_depth_cloud(
            &self.scene,
            &camera,
            &self.config.camera,
            mix_seed(self.config.seed, self.tick),
            ts,
        )?;

        let device_inv = invert_rigid(&self.config.observer);
        let mut tags = Vec::new();
        for t in &mut self.tags {
            let world_tag = match t.mount {
                TagMount::World(p) => p,
                TagMount::Robot(p) => robot.compose(&p),
            };
            let nominal = device_inv.compose(&world_tag);
            if self
                .config
                .observer_camera
                .project(nominal.translation)
                .is_some()
            {
                let (observed, _) = t.sampler.next(&nominal);
                tags.push(TagObservation {
                    tag_id: t.id,
                    pose_device_tag: observed,
                    timestamp_ns: ts,
                });
            }
        }
        let frame = SimFrame {
            tick: self.tick,
            timestamp_ns: ts,
            state: self.state,
            cloud,
            tags,
        };
        self.tick += 1;
        Ok(frame)
    }
}

/// Number of ticks in `duration_s` at `rate_hz`.
pub fn frame_count(duration_s: f64, rate_hz: f64) -> u64 {
    (duration_s * rate_hz + 1e-9).floor().max(0.0) as u64
}

/// Runs `frames` ticks offline.
pub fn run_simulation(sim: &mut Simulator, frames: u64) -> Result<Vec<SimFrame>, SimError> {
    (0..frames).map(|_| sim.tick()).collect()
}

#[derive(Debug, Clone)]
pub struct PublishOptions {
    pub bridge: SocketAddr,
    /// `None` runs until the stop flag is set.
    pub duration_s: Option<f64>,
    /// Pace ticks on the wall clock; otherwise publish as fast as possible.
    pub realtime: bool,
    pub connect_attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PublishSummary {
    pub frames: u64,
    pub messages: u64,
    pub reconnects: u64,
}

fn connect(opts: &PublishOptions, live: bool) -> Result<BridgeClient, SimError> {
    let client = BridgeClient::connect_with_retry(
        opts.bridge,
        &ClientOptions::new("simulator", Role::Both),
        opts.connect_attempts,
        Duration::from_millis(100),
    )
    .map_err(|e| SimError::Bridge(e.to_string()))?;
    if live {
        client
            .subscribe(TOPIC_TWIST)
            .map_err(|e| SimError::Bridge(e.to_string()))?;
    }
    Ok(client)
}

/// Publishes the simulation to a bridge. Lost connections are retried with
/// backoff; the frame being published when the link dropped is resent.
pub fn run_publisher(
    sim: &mut Simulator,
    opts: &PublishOptions,
    stop: &AtomicBool,
) -> Result<PublishSummary, SimError> {
    let live = matches!(sim.drive(), Drive::Live);
    let mut client = connect(opts, live)?;
    let frames = opts
        .duration_s
        .map(|d| frame_count(d, sim.config().rate_hz));
    let period = Duration::from_nanos(sim.config().period_ns());
    let start = Instant::now();
    let mut summary = PublishSummary::default();
    info!(
        "simulating at {} Hz, publishing to {}",
        sim.config().rate_hz,
        opts.bridge
    );

    while frames.is_none_or(|n| summary.frames < n) && !stop.load(Ordering::SeqCst) {
        while let Some(m) = client.try_recv() {
            if let Body::Twist { linear, angular } = m.body {
                sim.set_twist(linear, angular);
            }
        }
        if opts.realtime {
            let due = start + period * summary.frames as u32;
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        let frame = sim.tick()?;
        for msg in frame.messages() {
            loop {
                match client.publish(&msg) {
                    Ok(()) => break,
                    Err(e) => {
                        warn!("publish failed ({e}); reconnecting");
                        summary.reconnects += 1;
                        client = connect(opts, live)?;
                    }
                }
            }
            summary.messages += 1;
        }
        summary.frames += 1;
    }
    Ok(summary)
}
