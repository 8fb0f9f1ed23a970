//! Synthetic robot, box-world scene and raycasting depth camera.

mod camera;
mod robot;
mod scene;
mod world;

pub use camera::{forward_camera_rotation, look_at, render_depth_cloud, CameraModel};
pub use robot::{normalize_angle, step_robot, RobotState};
pub use scene::{default_scene, Hit, Scene, SceneBox, SceneTag};
pub use world::{
    frame_count, run_publisher, run_simulation, Drive, PublishOptions, PublishSummary, SimConfig,
    SimFrame, Simulator, TeleopSegment, WaypointPlan, MAP_FRAME, OBSERVER_FRAME,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("bridge: {0}")]
    Bridge(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
