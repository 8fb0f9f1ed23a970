//! Anchor the shared world origin at the robot from one tag sighting.

use asab::fiducial::{exact_observation, initialize_zero_point};
use asab::geometry::{Pose, UnitQuaternion, Vec3};
use asab::sim::{default_scene, look_at};

fn main() {
    let scene = default_scene();
    let ext = scene.robot_tag_extrinsics()[0];
    let robot = Pose::new(
        Vec3::new(1.0, 2.5, 0.0),
        UnitQuaternion::from_euler(0.0, 0.0, 0.7),
    );
    let device =
        look_at(Vec3::new(0.3, 2.5, 1.5), Vec3::new(1.5, 2.5, 0.3)).expect("distinct points");

    let obs = exact_observation(&robot, &ext, &device, 0);
    let t = obs.pose_device_tag.translation;
    println!(
        "tag {} seen at ({:.3}, {:.3}, {:.3}) in the device frame",
        obs.tag_id, t.x, t.y, t.z
    );

    let zero = initialize_zero_point(&obs, &ext, &device).expect("matching tag");
    println!(
        "recovered robot pose: position error {:.2e} m, rotation error {:.2e} rad",
        zero.pose_world_robot.position_error(&robot),
        zero.pose_world_robot.rotation_error(&robot)
    );
}
