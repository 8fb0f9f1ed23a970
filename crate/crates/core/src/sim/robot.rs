//! Differential-drive kinematics.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{Pose, UnitQuaternion, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// z stays on the ground plane.
    pub position: Vec3,
    /// Radians in (−π, π].
    pub heading: f64,
    pub linear_vel: f64,
    pub angular_vel: f64,
}

impl RobotState {
    pub fn at(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec3::new(x, y, 0.0),
            heading: normalize_angle(heading),
            linear_vel: 0.0,
            angular_vel: 0.0,
        }
    }

    /// Body pose: +x forward, +z up.
    pub fn pose(&self) -> Pose {
        Pose::new(
            self.position,
            UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), self.heading),
        )
    }
}

/// Maps an angle to (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Exact unicycle integration of a constant twist over `dt` seconds.
pub fn step_robot(state: &RobotState, v: f64, omega: f64, dt: f64) -> Result<RobotState, SimError> {
    if !(dt > 0.0 && dt.is_finite()) || !v.is_finite() || !omega.is_finite() {
        return Err(SimError::InvalidStep(format!(
            "v={v} omega={omega} dt={dt}"
        )));
    }
    let th = state.heading;
    let (dx, dy) = if omega.abs() < 1e-9 {
        (v * th.cos() * dt, v * th.sin() * dt)
    } else {
        let r = v / omega;
        let th1 = th + omega * dt;
        (r * (th1.sin() - th.sin()), -r * (th1.cos() - th.cos()))
    };
    Ok(RobotState {
        position: Vec3::new(
            state.position.x + dx,
            state.position.y + dy,
            state.position.z,
        ),
        heading: normalize_angle(th + omega * dt),
        linear_vel: v,
        angular_vel: omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_still() {
        let s = RobotState::at(1.0, 2.0, 0.3);
        let n = step_robot(&s, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(n.position, s.position);
        assert_eq!(n.heading, s.heading);
    }

    #[test]
    fn straight_line() {
        let n = step_robot(&RobotState::at(0.0, 0.0, 0.0), 1.0, 0.0, 1.0).unwrap();
        assert!(n.position.max_abs_diff(Vec3::new(1.0, 0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn quarter_circle() {
        let n = step_robot(&RobotState::at(0.0, 0.0, 0.0), PI / 2.0, PI / 2.0, 1.0).unwrap();
        assert!(n.position.max_abs_diff(Vec3::new(1.0, 1.0, 0.0)) < 1e-9);
        assert!((n.heading - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn spin_half_turn() {
        let n = step_robot(&RobotState::at(0.0, 0.0, 0.0), 0.0, PI, 1.0).unwrap();
        assert!((n.heading - PI).abs() < 1e-12);
        assert!(n.position.norm() < 1e-12);
    }

    #[test]
    fn normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!(step_robot(&RobotState::at(0.0, 0.0, 0.0), 1.0, 0.0, 0.0).is_err());
    }
}
