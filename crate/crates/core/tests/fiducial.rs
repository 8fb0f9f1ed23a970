use asab::fiducial::{
    default_tag_configs, estimate_pose, exact_observation, initialize_zero_point,
    run_averaging_experiment, synthesize_stream, EstimateStrategy, ExperimentSettings,
    FiducialError, NoiseModel, TagExtrinsic,
};
use asab::geometry::{angular_distance, Pose, UnitQuaternion, Vec3};
use proptest::prelude::*;

fn quat() -> impl Strategy<Value = UnitQuaternion> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter_map("non-zero", |(w, x, y, z)| {
            UnitQuaternion::new_normalize(w, x, y, z).ok()
        })
}

fn pose(r: f64) -> impl Strategy<Value = Pose> {
    ((-r..r, -r..r, -r..r), quat()).prop_map(|((x, y, z), q)| Pose::new(Vec3::new(x, y, z), q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn zero_point_from_exact_observation_is_exact(
        world_robot in pose(20.0),
        robot_tag in pose(0.5),
        device in pose(20.0),
        id in any::<u32>(),
    ) {
        let ext = TagExtrinsic { tag_id: id, pose_robot_tag: robot_tag };
        let obs = exact_observation(&world_robot, &ext, &device, 5);
        let zp = initialize_zero_point(&obs, &ext, &device).unwrap();
        prop_assert!(zp.pose_world_robot.position_error(&world_robot) <= 1e-9);
        prop_assert!(angular_distance(&zp.pose_world_robot.rotation, &world_robot.rotation) <= 1e-9);
        prop_assert_eq!(zp.source_count, 1);
    }
}

#[test]
fn zero_point_rejects_a_different_tag() {
    let ext = TagExtrinsic {
        tag_id: 1,
        pose_robot_tag: Pose::IDENTITY,
    };
    let mut obs = exact_observation(&Pose::IDENTITY, &ext, &Pose::IDENTITY, 0);
    obs.tag_id = 2;
    assert!(matches!(
        initialize_zero_point(&obs, &ext, &Pose::IDENTITY),
        Err(FiducialError::TagMismatch {
            observed: 2,
            expected: 1
        })
    ));
}

fn overhead() -> Pose {
    default_tag_configs()[0].truth
}

/// Mean position error of the N-sample average, over `runs` seeds.
fn averaged_error(model: &NoiseModel, n: usize, runs: u64) -> f64 {
    (0..runs)
        .map(|s| {
            let stream =
                synthesize_stream(&overhead(), &model.with_seed(1000 + s), n as f64, 1.0).unwrap();
            let est = estimate_pose(&stream.observations, EstimateStrategy::AverageAll).unwrap();
            est.position_error(stream.truth.last().unwrap())
        })
        .sum::<f64>()
        / runs as f64
}

#[test]
fn single_frame_error_matches_the_maxwell_mean() {
    // |e| for e ~ N(0, σ²I₃) has mean σ·√(8/π)
    let model = NoiseModel::static_default(0.25, 3);
    let stream = synthesize_stream(&overhead(), &model, 30.0, 600.0).unwrap();
    let n = stream.observations.len() as f64;
    let (mut pos, mut rot) = (0.0, 0.0);
    for (o, t) in stream.observations.iter().zip(&stream.truth) {
        pos += o.pose_device_tag.position_error(t);
        rot += angular_distance(&o.pose_device_tag.rotation, &t.rotation);
    }
    let k = (8.0 / std::f64::consts::PI).sqrt();
    let (pos, rot) = (pos / n, rot / n);
    assert!(
        (pos / (model.sigma_pos * k) - 1.0).abs() < 0.03,
        "pos {pos}"
    );
    assert!(
        (rot / (model.sigma_rot * k) - 1.0).abs() < 0.03,
        "rot {rot}"
    );
}

#[test]
fn static_averaging_error_shrinks_like_inverse_sqrt_n() {
    let model = NoiseModel::static_default(0.25, 0);
    let errs: Vec<f64> = [1, 10, 100, 1000]
        .iter()
        .map(|&n| averaged_error(&model, n, 200))
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    for (i, n) in [10.0f64, 100.0, 1000.0].iter().enumerate() {
        let ratio = errs[i + 1] / errs[0];
        let ideal = 1.0 / n.sqrt();
        assert!(
            ratio < 2.0 * ideal && ratio > 0.5 * ideal,
            "N={n}: {ratio} vs {ideal}"
        );
    }
}

#[test]
fn handheld_averaging_is_worse_than_single_frames() {
    let settings = ExperimentSettings {
        configs: default_tag_configs()
            .into_iter()
            .filter(|c| c.is_handheld())
            .collect(),
        ..ExperimentSettings::default()
    };
    assert!(settings.n_seeds >= 5);
    let report = run_averaging_experiment(&settings).unwrap();
    for c in &settings.configs {
        let single = report
            .row(c.config_id, EstimateStrategy::SingleFrame)
            .unwrap();
        let avg = report
            .row(c.config_id, EstimateStrategy::AverageAll)
            .unwrap();
        assert_eq!(single.n_samples, 1800);
        assert_eq!(avg.n_estimates, settings.n_seeds);
        assert!(
            avg.pos_err_m.mean > single.pos_err_m.median,
            "config {}",
            c.config_id
        );
        assert!(
            avg.rot_err_rad.mean > single.rot_err_rad.median,
            "config {}",
            c.config_id
        );
    }
}

#[test]
fn experiment_is_bit_reproducible() {
    let settings = ExperimentSettings {
        duration_s: 5.0,
        ..ExperimentSettings::default()
    };
    let a = run_averaging_experiment(&settings).unwrap();
    let b = run_averaging_experiment(&settings).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    let other = run_averaging_experiment(&ExperimentSettings {
        seed: 2,
        ..settings
    })
    .unwrap();
    assert_ne!(a.rows[0].pos_err_m, other.rows[0].pos_err_m);
}

#[test]
fn streams_have_the_requested_length_and_clock() {
    let s = synthesize_stream(&overhead(), &NoiseModel::noiseless(0), 30.0, 0.1).unwrap();
    assert_eq!(s.observations.len(), 3);
    let ts: Vec<u64> = s.observations.iter().map(|o| o.timestamp_ns).collect();
    assert_eq!(ts, [0, 33_333_333, 66_666_667]);
    assert!(s
        .observations
        .iter()
        .all(|o| o.pose_device_tag == overhead()));
    assert!(synthesize_stream(&overhead(), &NoiseModel::noiseless(0), 0.0, 1.0).is_err());
    assert!(estimate_pose(&[], EstimateStrategy::AverageAll).is_err());
}
