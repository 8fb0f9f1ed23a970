//! Drive the simulated robot through the two-room scene offline.

use asab::sim::{default_scene, run_simulation, Drive, SimConfig, Simulator, WaypointPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig {
        seed: 11,
        ..SimConfig::default()
    };
    let mut sim = Simulator::new(
        default_scene(),
        config,
        Drive::Waypoints(WaypointPlan::default()),
    )?;
    let frames = run_simulation(&mut sim, 50)?;
    for f in frames.iter().step_by(5) {
        println!(
            "t={:>5.2}s  x={:.3} y={:.3} heading={:>6.3}  cloud {:>5} points  tags {}",
            f.timestamp_ns as f64 * 1e-9,
            f.state.position.x,
            f.state.position.y,
            f.state.heading,
            f.cloud.len(),
            f.tags.len()
        );
    }
    let last = frames.last().expect("frames");
    println!("last tick publishes {} messages", last.messages().len());
    Ok(())
}
