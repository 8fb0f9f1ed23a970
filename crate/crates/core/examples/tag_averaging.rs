//! Single-frame versus averaged tag estimates on static and handheld mounts.
//!
//! `cargo run --example tag_averaging -- [duration_s]` (default 60 s of 30 Hz samples).

use asab::fiducial::{run_averaging_experiment, EstimateStrategy, ExperimentSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let duration_s = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(60.0);
    let settings = ExperimentSettings {
        duration_s,
        ..ExperimentSettings::default()
    };
    let report = run_averaging_experiment(&settings)?;
    println!(
        "{:<3} {:<9} {:>6}  {:>14} {:>14}  {:>14} {:>14}",
        "id", "mount", "dist", "single pos mm", "avg pos mm", "single rot mrad", "avg rot mrad"
    );
    for cfg in &settings.configs {
        let single = report
            .row(cfg.config_id, EstimateStrategy::SingleFrame)
            .expect("row");
        let avg = report
            .row(cfg.config_id, EstimateStrategy::AverageAll)
            .expect("row");
        println!(
            "{:<3} {:<9} {:>5.2}m  {:>14.3} {:>14.3}  {:>15.3} {:>14.3}",
            cfg.config_id,
            cfg.mount.name(),
            cfg.distance_m,
            single.pos_err_m.mean * 1e3,
            avg.pos_err_m.mean * 1e3,
            single.rot_err_rad.mean * 1e3,
            avg.rot_err_rad.mean * 1e3
        );
    }
    Ok(())
}
