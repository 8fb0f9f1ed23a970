//! TRS composition, point transforms, inversion and rotation averaging.

use std::f64::consts::FRAC_PI_2;

use asab::geometry::{average_rotations, compose_trs, invert_rigid, Pose, UnitQuaternion, Vec3};

fn main() {
    // quarter turn about z, scale 2, then shift by (1, 0, 0)
    let m = compose_trs(
        Vec3::new(1.0, 0.0, 0.0),
        UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2),
        2.0,
    )
    .expect("valid TRS");
    let p = m.transform_point(Vec3::new(1.0, 0.0, 0.0));
    println!("TRS maps (1, 0, 0) to ({:.3}, {:.3}, {:.3})", p.x, p.y, p.z);

    let back = m.inverse().transform_point(p);
    println!(
        "inverse brings it back to ({:.3}, {:.3}, {:.3})",
        back.x, back.y, back.z
    );

    println!("row-major entries:");
    for row in m.entries().chunks(4) {
        println!(
            "  {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            row[0], row[1], row[2], row[3]
        );
    }

    let a = Pose::new(
        Vec3::new(0.5, 0.0, 0.2),
        UnitQuaternion::from_euler(0.0, 0.0, 0.3),
    );
    let b = Pose::new(
        Vec3::new(0.0, 1.0, 0.0),
        UnitQuaternion::from_euler(0.1, 0.0, 0.0),
    );
    let ab = a.compose(&b);
    let err = ab
        .compose(&invert_rigid(&ab))
        .position_error(&Pose::default());
    println!("pose · inverse(pose) is identity to {err:.1e} m");

    // samples on both sides of the double cover still average correctly
    let q = UnitQuaternion::from_euler(0.0, 0.0, 0.4);
    let samples = [
        q,
        -q,
        UnitQuaternion::from_euler(0.0, 0.0, 0.38),
        UnitQuaternion::from_euler(0.0, 0.0, 0.42),
    ];
    let mean = average_rotations(&samples).expect("non-empty");
    println!(
        "mean yaw of mixed-sign samples: {:.4} rad",
        mean.euler_angles().2
    );
}
