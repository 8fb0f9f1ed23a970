//! Encode one message of every type, print its frame and decode it again.

use asab::geometry::{Pose, UnitQuaternion, Vec3};
use asab::pointcloud::{Point, ShadingMode};
use asab::wire::{decode, describe, encode, hex_dump, Body, Role, SubscribeAction, WireMessage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pose = Pose::new(
        Vec3::new(1.0, 2.0, 0.0),
        UnitQuaternion::from_euler(0.0, 0.0, 0.5),
    );
    let messages = [
        WireMessage::new(
            1,
            "",
            Body::Hello {
                role: Role::Subscriber,
                name: "viewer".into(),
            },
        ),
        WireMessage::new(
            2,
            "",
            Body::Subscribe {
                action: SubscribeAction::Subscribe,
                topic: "map/cloud".into(),
            },
        ),
        WireMessage::new(
            3,
            "map",
            Body::PointCloud {
                points: vec![Point::new([1.0, 0.5, -0.25], [255, 128, 0])],
            },
        ),
        WireMessage::pose(4, "map", pose),
        WireMessage::twist(5, 0.3, -0.1),
        WireMessage::new(
            6,
            "camera",
            Body::StreamFrame {
                stream_id: 0,
                seq: 9,
                data: vec![1, 2, 3],
            },
        ),
        WireMessage::new(7, "observer", Body::TagObservation { tag_id: 0, pose }),
        WireMessage::new(
            8,
            "",
            Body::ModeChange {
                mode: ShadingMode::default_natural_color(),
            },
        ),
        WireMessage::heartbeat(9),
    ];
    for msg in &messages {
        let frame = encode(msg)?;
        let back = decode(&frame)?;
        assert_eq!(&back, msg);
        println!("{} ({} bytes)", describe(msg), frame.len());
        println!("{}\n", hex_dump(&frame));
    }
    Ok(())
}
