mod common;

use asab::geometry::{compose_trs, Pose, UnitQuaternion, Vec3};
use asab::pointcloud::{
    build_batch, hsv_to_rgb, load_cloud, point_size_px, random_cloud, save_cloud, shade,
    write_shading_csv, BatchStrategy, CloudFormat, Point, PointCloud, PointSizing, RenderBatch,
    ShadedPoint, ShadingMode, RECORD_STRIDE,
};
use common::fixture;
use proptest::prelude::*;

/// Straight transcription of the mode formulas, without the library's
/// helpers. Returns `None` for hidden points.
fn oracle_rgb(
    mode: &ShadingMode,
    p: [f64; 3],
    color: [u8; 3],
    eye: [f64; 3],
    time: f64,
) -> Option<[f64; 3]> {
    let d = ((p[0] - eye[0]).powi(2) + (p[1] - eye[1]).powi(2) + (p[2] - eye[2]).powi(2)).sqrt();
    let c = color.map(f64::from);
    match *mode {
        ShadingMode::DistanceRamp { near, far } => {
            let i = 1.0 - ((d - near) / (far - near)).clamp(0.0, 1.0);
            Some([i * 255.0; 3])
        }
        ShadingMode::AxisColor { min, max } => {
            let (lo, hi) = (min.to_array(), max.to_array());
            Some(std::array::from_fn(|k| {
                ((p[k] - lo[k]) / (hi[k] - lo[k])).clamp(0.0, 1.0) * 255.0
            }))
        }
        ShadingMode::DepthRainbow {
            near,
            far,
            wavelength,
        } => {
            if d < near || d > far {
                return None;
            }
            let x = (d - near) / wavelength;
            let hue = 360.0 * (x - x.floor());
            // textbook HSV with s = v = 1
            let h = hue / 60.0;
            let f = h - h.floor();
            let rgb = match h.floor() as i32 % 6 {
                0 => [1.0, f, 0.0],
                1 => [1.0 - f, 1.0, 0.0],
                2 => [0.0, 1.0, f],
                3 => [0.0, 1.0 - f, 1.0],
                4 => [f, 0.0, 1.0],
                _ => [1.0, 0.0, 1.0 - f],
            };
            Some(rgb.map(|v| v * 255.0))
        }
        ShadingMode::NaturalColor {
            near_cutoff,
            far_cutoff,
        } => (near_cutoff <= d && d <= far_cutoff).then_some(c),
        ShadingMode::Sonar {
            period,
            max_range,
            pulse_width,
        } => {
            let r = max_range * ((time % period) / period);
            let b = (-((d - r) / pulse_width).powi(2)).exp();
            (b >= 1.0 / 255.0).then(|| c.map(|v| v * b))
        }
    }
}

fn all_modes() -> Vec<ShadingMode> {
    vec![
        ShadingMode::default_distance_ramp(),
        ShadingMode::default_axis_color(),
        ShadingMode::default_depth_rainbow(),
        ShadingMode::default_natural_color(),
        ShadingMode::default_sonar(),
    ]
}

fn assert_matches_oracle(cloud: &PointCloud, mode: &ShadingMode, eye: Vec3, time: f64) {
    let viewer = Pose::from_translation(eye);
    let out = shade(cloud, mode, &viewer, time, &PointSizing::default());
    for (pt, sp) in cloud.points().iter().zip(&out) {
        let p = pt.position_f64().to_array();
        match oracle_rgb(mode, p, pt.color, eye.to_array(), time) {
            None => assert!(!sp.keep, "{mode:?} {p:?} should be hidden"),
            Some(rgb) => {
                assert!(sp.keep, "{mode:?} {p:?} should be kept");
                for k in 0..3 {
                    assert!(
                        (sp.rgba[k] as f64 - rgb[k]).abs() <= 1.0,
                        "{mode:?} {p:?}: {:?} vs {rgb:?}",
                        sp.rgba
                    );
                }
                assert_eq!(sp.rgba[3], 255);
                let d = pt.position_f64().distance(eye);
                let size = point_size_px(d, 4.0, 2.0, 1.0, 16.0).unwrap();
                assert!((sp.size_px as f64 - size).abs() <= 1e-6 * size);
            }
        }
    }
}

#[test]
fn every_mode_matches_the_formula_oracle() {
    let cloud = random_cloud(5000, 10.0, 8);
    for mode in all_modes() {
        for (eye, t) in [
            (Vec3::ZERO, 0.0),
            (Vec3::new(0.5, -1.0, 0.2), 0.37),
            (Vec3::new(-2.0, 1.0, 1.0), 12.9),
        ] {
            assert_matches_oracle(&cloud, &mode, eye, t);
        }
    }
}

#[test]
fn hsv_primaries() {
    assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [255, 0, 0]);
    assert_eq!(hsv_to_rgb(120.0, 1.0, 1.0), [0, 255, 0]);
    assert_eq!(hsv_to_rgb(240.0, 1.0, 1.0), [0, 0, 255]);
    assert_eq!(hsv_to_rgb(360.0, 1.0, 1.0), [255, 0, 0]);
}

fn cloud_on_x_axis(distances: &[f64]) -> PointCloud {
    let pts = distances
        .iter()
        .map(|&d| Point::new([d as f32, 0.0, 0.0], [90, 60, 30]))
        .collect();
    PointCloud::new("test", 0, pts).unwrap()
}

#[test]
fn natural_color_cutoffs_two_to_four_meters() {
    let cloud = cloud_on_x_axis(&[1.999, 2.0, 3.0, 4.0, 4.001, 5.0]);
    let out = shade(
        &cloud,
        &ShadingMode::natural_color(2.0, 4.0).unwrap(),
        &Pose::IDENTITY,
        0.0,
        &PointSizing::default(),
    );
    let keep: Vec<bool> = out.iter().map(|s| s.keep).collect();
    assert_eq!(keep, [false, true, true, true, false, false]);
    assert_eq!(out[1].rgba, [90, 60, 30, 255]);
}

#[test]
fn rainbow_band_edges_are_red() {
    // 2.5 is exact in f32; 1.2 is not, so that edge is checked on f64 input
    let mode = ShadingMode::depth_rainbow(1.2, 2.5, 1.3).unwrap();
    let eye = Vec3::ZERO;
    let pos = [
        Vec3::new(1.2, 0.0, 0.0),
        Vec3::new(2.5, 0.0, 0.0),
        Vec3::new(1.19, 0.0, 0.0),
        Vec3::new(2.51, 0.0, 0.0),
    ];
    let out = asab::pointcloud::shade_points(
        &pos,
        &[[0; 3]; 4],
        &mode,
        &Pose::from_translation(eye),
        0.0,
        &PointSizing::default(),
    );
    assert!(out[0].keep && out[1].keep && !out[2].keep && !out[3].keep);
    assert_eq!(&out[0].rgba[..3], &[255, 0, 0]);
    assert_eq!(&out[1].rgba[..3], &[255, 0, 0]);
}

#[test]
fn frozen_shading_goldens_still_match() {
    let cloud = load_cloud(&fixture("clouds/sample.ply"), CloudFormat::PlyAscii).unwrap();
    let viewer = Pose::from_translation(Vec3::new(0.25, -0.5, 0.1));
    let positions: Vec<[f32; 3]> = cloud.points().iter().map(|p| p.position).collect();
    for mode in all_modes() {
        let out = shade(&cloud, &mode, &viewer, 0.3, &PointSizing::default());
        let expected =
            std::fs::read_to_string(fixture(&format!("shading/{}.csv", mode.name()))).unwrap();
        assert_eq!(
            write_shading_csv(&positions, &out).unwrap(),
            expected,
            "{}",
            mode.name()
        );
        assert_matches_oracle(&cloud, &mode, viewer.translation, 0.3);
    }
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = random_cloud(1000, 3.7, 21);
    for (name, fmt) in [
        ("c.ply", CloudFormat::PlyAscii),
        ("c.pcd", CloudFormat::PcdAscii),
    ] {
        let path = dir.path().join(name);
        save_cloud(&path, &cloud, fmt).unwrap();
        let back = load_cloud(&path, fmt).unwrap();
        assert_eq!(back.len(), 1000);
        for (a, b) in cloud.points().iter().zip(back.points()) {
            assert_eq!(a.position.map(f32::to_bits), b.position.map(f32::to_bits));
            assert_eq!(a.color, b.color);
        }
    }
}

#[test]
fn hundred_thousand_point_cube() {
    let cloud = random_cloud(100_000, 0.5, 1);
    assert!(cloud
        .points()
        .iter()
        .all(|p| p.position.iter().all(|c| c.abs() <= 0.25)));
    assert_eq!(cloud, random_cloud(100_000, 0.5, 1));
    let mode = ShadingMode::natural_color(0.1, 0.3).unwrap();
    let shaded = shade(&cloud, &mode, &Pose::IDENTITY, 0.0, &PointSizing::default());
    let positions: Vec<[f32; 3]> = cloud.points().iter().map(|p| p.position).collect();
    let kept = shaded.iter().filter(|s| s.keep).count();
    assert!(kept > 0 && kept < 100_000);
    let batch = build_batch(&positions, &shaded, BatchStrategy::SingleBuffer).unwrap();
    assert_eq!(batch.count(), kept);
    assert_eq!(batch.bytes().len(), kept * RECORD_STRIDE);
}

#[test]
fn transformed_cloud_matches_homogeneous_oracle() {
    let cloud = random_cloud(10_000, 0.5, 2);
    let q = UnitQuaternion::from_euler(0.2, 0.4, -1.3);
    let m = compose_trs(Vec3::new(1.0, 2.0, -0.5), q, 3.0).unwrap();
    let e = m.entries();
    let f64s = cloud.transformed_f64(&m);
    let f32s = cloud.transformed_f32(&m);
    for ((pt, a), b) in cloud.points().iter().zip(&f64s).zip(&f32s) {
        let h = [
            pt.position[0] as f64,
            pt.position[1] as f64,
            pt.position[2] as f64,
            1.0,
        ];
        let o: [f64; 3] = std::array::from_fn(|r| (0..4).map(|k| e[r * 4 + k] * h[k]).sum());
        assert!(a.max_abs_diff(Vec3::from_array(o)) <= 1e-9);
        assert!((0..3).all(|k| (b[k] as f64 - o[k]).abs() <= 1e-6));
    }
}

fn mode() -> impl Strategy<Value = ShadingMode> {
    (any::<u64>()).prop_map(|s| common::random_mode(&mut common::rng(s)))
}

fn shaded_cloud(
    seed: u64,
    n: usize,
    mode: &ShadingMode,
    t: f64,
) -> (Vec<[f32; 3]>, Vec<ShadedPoint>) {
    let cloud = random_cloud(n, 12.0, seed);
    let shaded = shade(
        &cloud,
        mode,
        &Pose::from_translation(Vec3::new(0.3, 0.1, -0.2)),
        t,
        &PointSizing::default(),
    );
    (cloud.points().iter().map(|p| p.position).collect(), shaded)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strategies_are_byte_identical(seed in any::<u64>(), n in 0usize..3000, chunk in 1usize..2048, m in mode(), t in 0.0..100.0f64) {
        let (pos, shaded) = shaded_cloud(seed, n, &m, t);
        let single = build_batch(&pos, &shaded, BatchStrategy::SingleBuffer).unwrap();
        prop_assert_eq!(&build_batch(&pos, &shaded, BatchStrategy::PerPoint).unwrap(), &single);
        prop_assert_eq!(&build_batch(&pos, &shaded, BatchStrategy::Chunked(chunk)).unwrap(), &single);
        let kept: Vec<_> = pos.iter().zip(&shaded).filter(|(_, s)| s.keep).collect();
        prop_assert_eq!(single.count(), kept.len());
        let again = RenderBatch::from_bytes(single.bytes().to_vec()).unwrap();
        for (rec, (p, s)) in again.records().zip(kept) {
            prop_assert_eq!(rec.position.map(f32::to_bits), p.map(f32::to_bits));
            prop_assert_eq!(rec.rgba, s.rgba);
            prop_assert_eq!(rec.size_px.to_bits(), s.size_px.to_bits());
        }
    }

    #[test]
    fn shading_is_pure_and_in_range(seed in any::<u64>(), m in mode(), t in -50.0..50.0f64) {
        let (_, a) = shaded_cloud(seed, 500, &m, t);
        let (_, b) = shaded_cloud(seed, 500, &m, t);
        prop_assert_eq!(&a, &b);
        let sizing = PointSizing::default();
        for s in a.iter().filter(|s| s.keep) {
            prop_assert!(s.size_px.is_finite());
            prop_assert!((sizing.min_px as f32..=sizing.max_px as f32).contains(&s.size_px));
            prop_assert_eq!(s.rgba[3], 255);
        }
    }

    #[test]
    fn sonar_repeats_every_period(seed in any::<u64>(), period_ms in 1u32..5000, t_ms in 0u32..100_000, k in 1u32..50) {
        let period = period_ms as f64 / 1000.0;
        let m = ShadingMode::sonar(period, 6.0, 0.15).unwrap();
        let t = t_ms as f64 / 1000.0;
        let (_, a) = shaded_cloud(seed, 300, &m, t);
        let (_, b) = shaded_cloud(seed, 300, &m, t + k as f64 * period);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn keep_is_a_closed_interval_test(near in 0.0..5.0f64, width in 0.01..5.0f64, d in 0.0..12.0f64) {
        let far = near + width;
        let eye = Pose::IDENTITY;
        let pos = [Vec3::new(d, 0.0, 0.0), Vec3::new(near, 0.0, 0.0), Vec3::new(far, 0.0, 0.0)];
        let sizing = PointSizing::default();
        for m in [ShadingMode::natural_color(near, far).unwrap(), ShadingMode::depth_rainbow(near, far, width).unwrap()] {
            let out = asab::pointcloud::shade_points(&pos, &[[1, 2, 3]; 3], &m, &eye, 0.0, &sizing);
            prop_assert_eq!(out[0].keep, near <= d && d <= far);
            prop_assert!(out[1].keep && out[2].keep);
        }
    }
}
