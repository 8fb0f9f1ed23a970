use std::f64::consts::{FRAC_PI_2, PI};

use asab::geometry::Vec3;
use asab::sim::{
    default_scene, look_at, render_depth_cloud, run_simulation, step_robot, CameraModel, Drive,
    RobotState, Scene, SceneBox, SimConfig, Simulator, WaypointPlan,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nearest hit found by intersecting the ray with every face rectangle.
fn face_oracle(scene: &Scene, o: [f64; 3], d: [f64; 3], max: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for b in &scene.boxes {
        for a in 0..3 {
            if d[a] == 0.0 {
                continue;
            }
            for plane in [b.min_m[a], b.max_m[a]] {
                let t = (plane - o[a]) / d[a];
                if !(t >= 0.0 && t <= max) {
                    continue;
                }
                let inside = (0..3).filter(|&k| k != a).all(|k| {
                    let x = o[k] + t * d[k];
                    x >= b.min_m[k] - 1e-12 && x <= b.max_m[k] + 1e-12
                });
                if inside && best.is_none_or(|bt| t < bt) {
                    best = Some(t);
                }
            }
        }
    }
    best
}

fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

#[test]
fn raycast_matches_face_oracle_on_random_rays() {
    let scene = default_scene();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = 0;
    for _ in 0..1000 {
        let o = [
            rng.random_range(0.05..7.95),
            rng.random_range(0.05..4.95),
            rng.random_range(0.05..2.4),
        ];
        let d = unit(&mut rng);
        let max = rng.random_range(0.5..12.0);
        let got = scene.raycast(Vec3::from_array(o), Vec3::from_array(d), max);
        let want = face_oracle(&scene, o, d, max);
        match (got, want) {
            (Some(h), Some(t)) => {
                hits += 1;
                assert!(
                    (h.range - t).abs() < 1e-9,
                    "{o:?} {d:?}: {} vs {t}",
                    h.range
                );
                let p: [f64; 3] = std::array::from_fn(|k| o[k] + t * d[k]);
                assert!(h.point.max_abs_diff(Vec3::from_array(p)) < 1e-9);
                assert!(scene.boxes[h.box_index].surface_distance(h.point) < 1e-9);
            }
            (None, None) => {}
            other => panic!("{o:?} {d:?} max {max}: {other:?}"),
        }
    }
    assert!(hits > 500, "only {hits} hits");
}

#[test]
fn noiseless_points_lie_on_surfaces() {
    let scene = default_scene();
    let model = CameraModel::default();
    let poses = [
        look_at(Vec3::new(1.0, 2.5, 0.45), Vec3::new(3.0, 2.5, 0.4)).unwrap(),
        look_at(Vec3::new(2.0, 1.0, 1.5), Vec3::new(0.8, 4.5, 0.5)).unwrap(),
        look_at(Vec3::new(6.5, 2.5, 0.3), Vec3::new(6.5, 1.0, 0.3)).unwrap(),
    ];
    for pose in poses {
        let cloud = render_depth_cloud(&scene, &pose, &model, 0, 0).unwrap();
        assert!(cloud.len() > 10_000);
        for p in cloud.points() {
            let x = p.position_f64();
            assert!(scene.surface_distance(x) <= 1e-6, "{x:?}");
            assert!((x - pose.translation).norm() <= model.max_range_m + 1e-6);
        }
    }
}

fn wall() -> Scene {
    Scene {
        name: "wall".into(),
        boxes: vec![SceneBox::new(
            "wall",
            [3.0, -20.0, -20.0],
            [3.1, 20.0, 20.0],
            [1, 2, 3],
        )],
        tags: vec![],
        robot_tags: vec![],
    }
}

#[test]
fn range_noise_has_the_configured_spread() {
    let sigma = 0.02;
    let pose = look_at(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).unwrap();

    // along the ray, against the noiseless render of the same pixels
    let noisy = CameraModel {
        range_noise_sigma_m: sigma,
        ..CameraModel::default()
    };
    let clean = CameraModel {
        range_noise_sigma_m: 0.0,
        ..noisy
    };
    let a = render_depth_cloud(&wall(), &pose, &noisy, 17, 0).unwrap();
    let b = render_depth_cloud(&wall(), &pose, &clean, 17, 0).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 10_000);
    let sq: f64 = a
        .points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p.position_f64() - q.position_f64()).norm().powi(2))
        .sum();
    let rms = (sq / a.len() as f64).sqrt();
    assert!((rms - sigma).abs() <= 0.1 * sigma, "along-ray rms {rms}");

    // point-to-plane, with a narrow field of view so rays hit nearly head-on
    let narrow = CameraModel {
        horizontal_fov_deg: 20.0,
        cols: 128,
        rows: 96,
        range_noise_sigma_m: sigma,
        ..CameraModel::default()
    };
    let c = render_depth_cloud(&wall(), &pose, &narrow, 18, 0).unwrap();
    let n = c.len() as f64;
    let offsets: Vec<f64> = c
        .points()
        .iter()
        .map(|p| p.position_f64().x - 3.0)
        .collect();
    let rms = (offsets.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    let mean = offsets.iter().sum::<f64>() / n;
    assert!((rms - sigma).abs() <= 0.1 * sigma, "plane rms {rms}");
    assert!(mean.abs() <= 4.0 * sigma / n.sqrt(), "bias {mean}");
}

#[test]
fn quarter_circle() {
    let s = step_robot(&RobotState::at(0.0, 0.0, 0.0), 1.0, FRAC_PI_2, 1.0).unwrap();
    let r = 2.0 / PI;
    assert!(s.position.max_abs_diff(Vec3::new(r, r, 0.0)) < 1e-9);
    assert!((s.heading - FRAC_PI_2).abs() < 1e-9);
    let straight = step_robot(&RobotState::at(1.0, 1.0, PI), 2.0, 0.0, 0.5).unwrap();
    assert!(straight.position.max_abs_diff(Vec3::new(0.0, 1.0, 0.0)) < 1e-9);
    assert!(step_robot(&RobotState::at(0.0, 0.0, 0.0), 1.0, 0.0, 0.0).is_err());
    assert!(step_robot(&RobotState::at(0.0, 0.0, 0.0), f64::NAN, 0.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn integration_is_time_additive(
        x in -10.0..10.0f64, y in -10.0..10.0f64, th in -PI..PI,
        v in -2.0..2.0f64, w in -3.0..3.0f64,
        t1 in 0.001..2.0f64, t2 in 0.001..2.0f64,
    ) {
        let s = RobotState::at(x, y, th);
        let once = step_robot(&s, v, w, t1 + t2).unwrap();
        let twice = step_robot(&step_robot(&s, v, w, t1).unwrap(), v, w, t2).unwrap();
        prop_assert!(once.position.max_abs_diff(twice.position) < 1e-9);
        let dh = (once.heading - twice.heading).abs();
        prop_assert!(dh < 1e-9 || (dh - 2.0 * PI).abs() < 1e-9);
        prop_assert!(once.heading > -PI && once.heading <= PI);
        prop_assert_eq!(once.position.z, 0.0);
    }

    #[test]
    fn integration_preserves_circle_radius(v in 0.1..2.0f64, w in 0.1..3.0f64, dt in 0.01..5.0f64) {
        // the centre of curvature is fixed, so the distance to it stays v/ω
        let s = RobotState::at(0.0, 0.0, 0.0);
        let c = Vec3::new(0.0, v / w, 0.0);
        let n = step_robot(&s, v, w, dt).unwrap();
        prop_assert!(((n.position - c).norm() - v / w).abs() < 1e-9);
    }
}

fn patrol_config(seed: u64) -> (SimConfig, Drive) {
    let config = SimConfig {
        seed,
        camera: CameraModel {
            range_noise_sigma_m: 0.01,
            cols: 64,
            rows: 48,
            ..CameraModel::default()
        },
        ..SimConfig::default()
    };
    let drive = Drive::Waypoints(WaypointPlan {
        points: vec![[3.0, 2.5], [6.0, 2.5], [6.0, 4.0]],
        speed_mps: 0.5,
        max_turn_rate: 1.0,
        looped: true,
    });
    (config, drive)
}

#[test]
fn simulation_is_bit_reproducible() {
    let run = |seed| {
        let (config, drive) = patrol_config(seed);
        let mut sim = Simulator::new(default_scene(), config, drive).unwrap();
        run_simulation(&mut sim, 50).unwrap()
    };
    let a = run(7);
    let b = run(7);
    assert_eq!(a, b);
    assert_ne!(a[10].cloud, run(8)[10].cloud);
    for (i, f) in a.iter().enumerate() {
        assert_eq!(f.tick, i as u64);
        assert_eq!(f.timestamp_ns, i as u64 * 200_000_000);
        assert_eq!(f.cloud.frame_id(), "map");
        assert_eq!(f.cloud.timestamp_ns(), f.timestamp_ns);
    }
    assert!(
        a[49].state.position.x > a[0].state.position.x + 1.0,
        "robot moved"
    );
}

#[test]
fn stationary_noiseless_robot_renders_identical_clouds() {
    let mut sim = Simulator::new(default_scene(), SimConfig::default(), Drive::Stationary).unwrap();
    let frames = run_simulation(&mut sim, 3).unwrap();
    assert!(!frames[0].cloud.is_empty());
    assert_eq!(frames[0].cloud.points(), frames[2].cloud.points());
}
