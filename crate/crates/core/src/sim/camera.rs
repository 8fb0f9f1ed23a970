//! Pinhole depth camera. Camera frame: +z forward, +x right, +y down.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Scene, SimError};
use crate::geometry::{Pose, UnitQuaternion, Vec3};
use crate::pointcloud::{Point, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub horizontal_fov_deg: f64,
    pub cols: u32,
    pub rows: u32,
    pub max_range_m: f64,
    pub range_noise_sigma_m: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            horizontal_fov_deg: 87.0,
            cols: 160,
            rows: 120,
            max_range_m: 8.0,
            range_noise_sigma_m: 0.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let fov = self.horizontal_fov_deg;
        if !(fov > 0.0 && fov < 180.0) {
            return Err(SimError::InvalidCamera(format!(
                "fov {fov} must be in (0, 180)"
            )));
        }
        if self.cols == 0 || self.rows == 0 {
            return Err(SimError::InvalidCamera(
                "resolution must be at least 1x1".into(),
            ));
        }
        if !(self.max_range_m > 0.0 && self.max_range_m.is_finite()) {
            return Err(SimError::InvalidCamera(
                "max_range_m must be positive".into(),
            ));
        }
        if !(self.range_noise_sigma_m >= 0.0 && self.range_noise_sigma_m.is_finite()) {
            return Err(SimError::InvalidCamera(
                "range_noise_sigma_m must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Focal length in pixels; pixels are square.
    pub fn focal_px(&self) -> f64 {
        (self.cols as f64 / 2.0) / (self.horizontal_fov_deg.to_radians() / 2.0).tan()
    }

    fn center(&self) -> (f64, f64) {
        (self.cols as f64 / 2.0, self.rows as f64 / 2.0)
    }

    /// Unit ray through the center of pixel (`col`, `row`), camera frame.
    pub fn pixel_ray(&self, col: u32, row: u32) -> Vec3 {
        let f = self.focal_px();
        let (cx, cy) = self.center();
        Vec3::new(
            (col as f64 + 0.5 - cx) / f,
            (row as f64 + 0.5 - cy) / f,
            1.0,
        )
        .normalized()
        .expect("non-zero ray")
    }

    /// Image coordinates of a camera-frame point, if it is in front of the
    /// camera, inside the image and within range.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        if p.z <= 0.0 || p.norm() > self.max_range_m {
            return None;
        }
        let f = self.focal_px();
        let (cx, cy) = self.center();
        let (u, v) = (cx + f * p.x / p.z, cy + f * p.y / p.z);
        let inside = (0.0..=self.cols as f64).contains(&u) && (0.0..=self.rows as f64).contains(&v);
        inside.then_some((u, v))
    }
}

/// Camera pose at `eye` looking at `target`, with world +z as up.
pub fn look_at(eye: Vec3, target: Vec3) -> Result<Pose, SimError> {
    let z = (target - eye)
        .normalized()
        .ok_or_else(|| SimError::InvalidCamera("eye and target coincide".into()))?;
    let up = if z.cross(Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-9 {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let x = z.cross(up).normalized().expect("not parallel");
    let y = z.cross(x);
    let m = [[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]];
    let q = UnitQuaternion::from_rotation_matrix(&m)
        .map_err(|e| SimError::InvalidCamera(e.to_string()))?;
    Ok(Pose::new(eye, q))
}

/// Rotation taking camera axes to a body frame with +x forward, +z up.
pub fn forward_camera_rotation() -> UnitQuaternion {
    UnitQuaternion::from_rotation_matrix(&[[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
        .expect("proper rotation")
}

/// One ray per pixel, row-major. Hit ranges get Gaussian noise along the
/// ray and are clamped to `[0, max_range]`. The cloud is in world
/// coordinates with frame id `"map"`.
pub fn render_depth_cloud(
    scene: &Scene,
    camera_pose: &Pose,
    model: &CameraModel,
    seed: u64,
    timestamp_ns: u64,
) -> Result<PointCloud, SimError> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (model.range_noise_sigma_m > 0.0)
        .then(|| Normal::new(0.0, model.range_noise_sigma_m).expect("valid sigma"));
    let origin = camera_pose.translation;
    let mut points = Vec::new();
    for row in 0..model.rows {
        for col in 0..model.cols {
            let dir = camera_pose.rotation.rotate(model.pixel_ray(col, row));
            let Some(hit) = scene.raycast(origin, dir, model.max_range_m) else {
                continue;
            };
            let range = match &noise {
                Some(n) => (hit.range + n.sample(&mut rng)).clamp(0.0, model.max_range_m),
                None => hit.range,
            };
            let p = origin + dir * range;
            points.push(Point::new([p.x as f32, p.y as f32, p.z as f32], hit.color));
        }
    }
    PointCloud::new("map", timestamp_ns, points).map_err(|e| SimError::InvalidScene(e.to_string()))
}
