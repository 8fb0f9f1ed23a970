//! Start a bridge, subscribe one client, publish from another.

use std::time::Duration;

use asab::bridge::{BridgeClient, BridgeConfig, BridgeHandle, TOPIC_CLOUD, TOPIC_POSE};
use asab::geometry::{Pose, Vec3};
use asab::pointcloud::random_cloud;
use asab::wire::{describe, monotonic_ns, Role, WireMessage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bridge = BridgeHandle::start(BridgeConfig::ephemeral())?;
    println!(
        "bridge on tcp {} ws {:?}",
        bridge.tcp_addr(),
        bridge.ws_addr()
    );

    let robot = BridgeClient::connect(bridge.tcp_addr(), "robot", Role::Publisher)?;
    // the pose topic is latched, so a late subscriber still gets the last pose
    robot.publish(&WireMessage::pose(
        monotonic_ns(),
        "map",
        Pose::from_translation(Vec3::new(1.0, 2.0, 0.0)),
    ))?;
    std::thread::sleep(Duration::from_millis(100));

    let viewer = BridgeClient::connect(bridge.tcp_addr(), "viewer", Role::Subscriber)?;
    viewer.subscribe(TOPIC_POSE)?;
    viewer.subscribe(TOPIC_CLOUD)?;
    std::thread::sleep(Duration::from_millis(100));

    let mut cloud = random_cloud(500, 1.0, 3);
    cloud.set_frame_id("map");
    cloud.set_timestamp_ns(monotonic_ns());
    robot.publish(&WireMessage::point_cloud(&cloud))?;

    for _ in 0..2 {
        match viewer.recv_timeout(Duration::from_secs(2)) {
            Some(m) => println!("viewer got {}", describe(&m)),
            None => println!("viewer timed out"),
        }
    }
    println!("hub published {} messages", bridge.hub().published());
    bridge.shutdown();
    Ok(())
}
