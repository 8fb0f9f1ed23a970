//! Write a cloud to PLY, load it back, shade it in every view mode and pack
//! a render batch.

use asab::geometry::{Pose, Vec3};
use asab::pointcloud::{
    build_batch, load_cloud, random_cloud, save_cloud, shade, BatchStrategy, CloudFormat,
    PointSizing, ShadingMode,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("asab-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("cube.ply");

    // a 4 m cube of random points, viewed from one corner
    save_cloud(&path, &random_cloud(20_000, 4.0, 7), CloudFormat::PlyAscii)?;
    let cloud = load_cloud(&path, CloudFormat::PlyAscii)?;
    println!("loaded {} points from {}", cloud.len(), path.display());

    let viewer = Pose::from_translation(Vec3::new(-2.0, -2.0, -2.0));
    let sizing = PointSizing::default();
    let positions: Vec<[f32; 3]> = cloud.points().iter().map(|p| p.position).collect();
    for name in [
        "distance_ramp",
        "axis_color",
        "depth_rainbow",
        "natural_color",
        "sonar",
    ] {
        let mode = ShadingMode::default_for(name).expect("known mode");
        let shaded = shade(&cloud, &mode, &viewer, 0.25, &sizing);
        let batch = build_batch(&positions, &shaded, BatchStrategy::SingleBuffer)?;
        println!(
            "{name:<14} kept {:>6} points, batch {:>7} bytes",
            batch.count(),
            batch.bytes().len()
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
