//! Box-world scenes and analytic raycasting.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::fiducial::TagExtrinsic;
use crate::geometry::{Pose, UnitQuaternion, Vec3};

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBox {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub min_m: [f64; 3],
    pub max_m: [f64; 3],
    pub color_rgb: [u8; 3],
}

impl SceneBox {
    pub fn new(name: &str, min_m: [f64; 3], max_m: [f64; 3], color_rgb: [u8; 3]) -> Self {
        Self {
            name: Some(name.into()),
            min_m,
            max_m,
            color_rgb,
        }
    }

    pub fn min(&self) -> Vec3 {
        Vec3::from_array(self.min_m)
    }

    pub fn max(&self) -> Vec3 {
        Vec3::from_array(self.max_m)
    }

    /// Distance from `p` to the box surface (0 on the surface, positive
    /// inside and outside).
    pub fn surface_distance(&self, p: Vec3) -> f64 {
        let p = p.to_array();
        let mut outside = [0.0f64; 3];
        let mut inside_min = f64::INFINITY;
        let mut is_inside = true;
        for a in 0..3 {
            let below = self.min_m[a] - p[a];
            let above = p[a] - self.max_m[a];
            outside[a] = below.max(above).max(0.0);
            if below > 0.0 || above > 0.0 {
                is_inside = false;
            }
            inside_min = inside_min.min((-below).min(-above));
        }
        if is_inside {
            inside_min
        } else {
            outside.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }

    /// Slab test. Returns the smallest crossing parameter `t ≥ 0`.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let o = origin.to_array();
        let d = dir.to_array();
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if d[a] == 0.0 {
                if o[a] < self.min_m[a] || o[a] > self.max_m[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[a];
            let (mut near, mut far) = ((self.min_m[a] - o[a]) * inv, (self.max_m[a] - o[a]) * inv);
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t1 < t0 {
                return None;
            }
        }
        if t0 >= 0.0 {
            Some(t0)
        } else if t1 >= 0.0 {
            Some(t1)
        } else {
            None
        }
    }
}

/// A tag given by position and roll/pitch/yaw in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTag {
    pub id: u32,
    pub position_m: [f64; 3],
    #[serde(default)]
    pub rpy_deg: [f64; 3],
}

impl SceneTag {
    pub fn pose(&self) -> Pose {
        let [r, p, y] = self.rpy_deg.map(f64::to_radians);
        Pose::new(
            Vec3::from_array(self.position_m),
            UnitQuaternion::from_euler(r, p, y),
        )
    }
}

/// Scene file contents. `tags` are fixed in the world; `robot_tags` are
/// given in the robot body frame and move with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub name: String,
    pub boxes: Vec<SceneBox>,
    #[serde(default)]
    pub tags: Vec<SceneTag>,
    #[serde(default)]
    pub robot_tags: Vec<SceneTag>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Vec3,
    pub range: f64,
    pub color: [u8; 3],
    pub box_index: usize,
}

impl Scene {
    pub fn empty() -> Self {
        Self {
            name: "empty".into(),
            boxes: vec![],
            tags: vec![],
            robot_tags: vec![],
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (i, b) in self.boxes.iter().enumerate() {
            let finite = b.min_m.iter().chain(&b.max_m).all(|v| v.is_finite());
            if !finite || (0..3).any(|a| b.min_m[a] >= b.max_m[a]) {
                return Err(SimError::InvalidScene(format!(
                    "box {i} ({}) needs finite min < max on every axis",
                    b.name.as_deref().unwrap_or("unnamed")
                )));
            }
        }
        let mut ids = HashSet::new();
        for t in self.tags.iter().chain(&self.robot_tags) {
            let finite = t.position_m.iter().chain(&t.rpy_deg).all(|v| v.is_finite());
            if !finite {
                return Err(SimError::InvalidScene(format!(
                    "tag {} is not finite",
                    t.id
                )));
            }
            if !ids.insert(t.id) {
                return Err(SimError::InvalidScene(format!("duplicate tag id {}", t.id)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn robot_tag_extrinsics(&self) -> Vec<TagExtrinsic> {
        self.robot_tags
            .iter()
            .map(|t| TagExtrinsic {
                tag_id: t.id,
                pose_robot_tag: t.pose(),
            })
            .collect()
    }

    /// Nearest surface hit along the unit direction `dir` within `max_range`.
    pub fn raycast(&self, origin: Vec3, dir: Vec3, max_range: f64) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        for (i, b) in self.boxes.iter().enumerate() {
            if let Some(t) = b.intersect(origin, dir) {
                if t <= max_range && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best.map(|(t, i)| Hit {
            point: origin + dir * t,
            range: t,
            color: self.boxes[i].color_rgb,
            box_index: i,
        })
    }

    /// Distance from `p` to the nearest box surface.
    pub fn surface_distance(&self, p: Vec3) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.surface_distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

const WALL: f64 = 0.1;
const HEIGHT: f64 = 2.5;

/// Two 4 m × 5 m rooms side by side along x, joined by a 1 m doorway, with a
/// floor, some furniture and one tag on the robot's back plate.
pub fn default_scene() -> Scene {
    let h = WALL / 2.0;
    let wall = [200, 190, 170];
    let boxes = vec![
        SceneBox::new(
            "floor",
            [-WALL, -WALL, -0.05],
            [8.0 + WALL, 5.0 + WALL, 0.0],
            [110, 100, 90],
        ),
        SceneBox::new(
            "wall_south",
            [-WALL, -WALL, 0.0],
            [8.0 + WALL, 0.0, HEIGHT],
            wall,
        ),
        SceneBox::new(
            "wall_north",
            [-WALL, 5.0, 0.0],
            [8.0 + WALL, 5.0 + WALL, HEIGHT],
            wall,
        ),
        SceneBox::new(
            "wall_west",
            [-WALL, 0.0, 0.0],
            [0.0, 5.0, HEIGHT],
            [180, 200, 220],
        ),
        SceneBox::new(
            "wall_east",
            [8.0, 0.0, 0.0],
            [8.0 + WALL, 5.0, HEIGHT],
            [220, 180, 180],
        ),
        SceneBox::new(
            "divider_south",
            [4.0 - h, 0.0, 0.0],
            [4.0 + h, 2.0, HEIGHT],
            [190, 220, 190],
        ),
        SceneBox::new(
            "divider_north",
            [4.0 - h, 3.0, 0.0],
            [4.0 + h, 5.0, HEIGHT],
            [190, 220, 190],
        ),
        SceneBox::new("cabinet", [0.2, 4.2, 0.0], [1.4, 4.8, 1.8], [120, 70, 40]),
        SceneBox::new("table", [6.0, 0.6, 0.0], [7.2, 1.6, 0.75], [160, 110, 60]),
        SceneBox::new("crate", [5.2, 3.8, 0.0], [5.8, 4.4, 0.6], [60, 120, 160]),
    ];
    Scene {
        name: "two_rooms".into(),
        boxes,
        tags: vec![],
        robot_tags: vec![SceneTag {
            id: 0,
            position_m: [-0.2, 0.0, 0.3],
            // tag normal (+z) points backwards out of the robot
            rpy_deg: [0.0, -90.0, 0.0],
        }],
    }
}
