#![allow(dead_code)]

use std::path::PathBuf;

use asab::geometry::{Pose, UnitQuaternion, Vec3};
use asab::pointcloud::{Point, ShadingMode};
use asab::wire::{Body, MsgType, Role, SubscribeAction, WireMessage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

/// Bytes from a whitespace-separated hex dump.
pub fn read_hex(rel: &str) -> Vec<u8> {
    let text = std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
    text.split_whitespace()
        .map(|b| u8::from_str_radix(b, 16).expect("hex byte"))
        .collect()
}

/// The message frozen in `golden/<name>.hex`, one per type.
pub fn golden_messages() -> Vec<(&'static str, WireMessage)> {
    let q = |w, x, y, z| UnitQuaternion::from_unit_components(w, x, y, z).unwrap();
    vec![
        (
            "hello",
            WireMessage::new(
                1000,
                "viewer",
                Body::Hello {
                    role: Role::Subscriber,
                    name: "hud".into(),
                },
            ),
        ),
        (
            "subscribe",
            WireMessage::new(
                2000,
                "",
                Body::Subscribe {
                    action: SubscribeAction::Subscribe,
                    topic: "map/cloud".into(),
                },
            ),
        ),
        (
            "point_cloud",
            WireMessage::new(
                123_456_789,
                "map",
                Body::PointCloud {
                    points: vec![
                        Point::new([1.0, -2.0, 0.5], [255, 0, 128]),
                        Point::new([0.25, 0.0, -1.0], [10, 20, 30]),
                    ],
                },
            ),
        ),
        (
            "pose",
            WireMessage::pose(
                5_000_000_000,
                "map",
                Pose::new(Vec3::new(1.0, 2.0, 3.0), q(0.5, 0.5, 0.5, 0.5)),
            ),
        ),
        ("twist", WireMessage::twist(42, 0.5, -0.25)),
        (
            "stream_frame",
            WireMessage::new(
                7,
                "cam0",
                Body::StreamFrame {
                    stream_id: 3,
                    seq: 9,
                    data: vec![0xde, 0xad, 0xbe, 0xef],
                },
            ),
        ),
        (
            "tag_observation",
            WireMessage::new(
                99,
                "observer",
                Body::TagObservation {
                    tag_id: 0,
                    pose: Pose::new(Vec3::new(0.0, 0.0, 0.25), q(0.0, 1.0, 0.0, 0.0)),
                },
            ),
        ),
        (
            "mode_change",
            WireMessage::new(
                0,
                "",
                Body::ModeChange {
                    mode: ShadingMode::natural_color(2.0, 4.0).unwrap(),
                },
            ),
        ),
        ("heartbeat", WireMessage::heartbeat(0)),
    ]
}

const TEXT_POOL: &[char] = &[
    'a', 'z', 'M', '0', '/', '_', '-', ' ', 'é', 'ß', '→', '雲', '🤖',
];

fn text(rng: &mut ChaCha8Rng, max_bytes: usize) -> String {
    let mut s = String::new();
    let target = rng.random_range(0..=max_bytes);
    loop {
        let c = TEXT_POOL[rng.random_range(0..TEXT_POOL.len())];
        if s.len() + c.len_utf8() > target {
            return s;
        }
        s.push(c);
    }
}

fn real(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..8) {
        0 => 0.0,
        1 => -0.0,
        2 => f64::MAX * rng.random_range(-1.0..1.0),
        3 => f64::MIN_POSITIVE * rng.random_range(1.0..1e6),
        _ => rng.random_range(-1e4..1e4),
    }
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let q =
        UnitQuaternion::new_normalize(c[0], c[1], c[2], c[3]).unwrap_or(UnitQuaternion::IDENTITY);
    Pose::new(Vec3::new(real(rng), real(rng), real(rng)), q)
}

pub fn random_mode(rng: &mut ChaCha8Rng) -> ShadingMode {
    let near = rng.random_range(0.0..10.0);
    let far = near + rng.random_range(0.01..10.0);
    match rng.random_range(0..5) {
        0 => ShadingMode::distance_ramp(near, far).unwrap(),
        1 => {
            let min = Vec3::new(-near, -far, rng.random_range(-5.0..0.0));
            let max = Vec3::new(far, near + 0.1, rng.random_range(0.1..5.0));
            ShadingMode::axis_color(min, max).unwrap()
        }
        2 => ShadingMode::depth_rainbow(near, far, rng.random_range(0.01..5.0)).unwrap(),
        3 => ShadingMode::natural_color(near, far).unwrap(),
        _ => ShadingMode::sonar(
            rng.random_range(0.01..10.0),
            rng.random_range(0.1..20.0),
            rng.random_range(0.01..2.0),
        )
        .unwrap(),
    }
}

/// A valid random message of the given type.
pub fn random_message(rng: &mut ChaCha8Rng, ty: MsgType) -> WireMessage {
    let ts = match rng.random_range(0..4) {
        0 => 0,
        1 => u64::MAX,
        _ => rng.random(),
    };
    let frame_id = text(rng, 255);
    let body = match ty {
        MsgType::Hello => Body::Hello {
            role: [Role::Publisher, Role::Subscriber, Role::Both][rng.random_range(0..3)],
            name: text(rng, 255),
        },
        MsgType::Subscribe => Body::Subscribe {
            action: if rng.random() {
                SubscribeAction::Subscribe
            } else {
                SubscribeAction::Unsubscribe
            },
            topic: text(rng, 255),
        },
        MsgType::PointCloud => {
            let n = rng.random_range(0..200);
            Body::PointCloud {
                points: (0..n)
                    .map(|_| {
                        let p: [f32; 3] = std::array::from_fn(|_| rng.random_range(-1e3f32..1e3));
                        Point::new(p, rng.random())
                    })
                    .collect(),
            }
        }
        MsgType::Pose => Body::Pose {
            pose: random_pose(rng),
        },
        MsgType::Twist => Body::Twist {
            linear: real(rng),
            angular: real(rng),
        },
        MsgType::StreamFrame => {
            let n = rng.random_range(0..4096);
            Body::StreamFrame {
                stream_id: rng.random(),
                seq: rng.random(),
                data: (0..n).map(|_| rng.random()).collect(),
            }
        }
        MsgType::TagObservation => Body::TagObservation {
            tag_id: rng.random(),
            pose: random_pose(rng),
        },
        MsgType::ModeChange => Body::ModeChange {
            mode: random_mode(rng),
        },
        MsgType::Heartbeat => return WireMessage::heartbeat(ts),
    };
    WireMessage::new(ts, frame_id, body)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
