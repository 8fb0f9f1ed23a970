//! Compare render-batch submission strategies on 100 000 random points.
//!
//! `cargo run --release --example bench_batch -- [duration_s]` (default 5 s each).

use asab::bench::{bench_batch, BatchBenchConfig};
use asab::pointcloud::{BatchStrategy, DEFAULT_CHUNK};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let duration_s = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(5.0);
    let mut medians = Vec::new();
    for strategy in [
        BatchStrategy::PerPoint,
        BatchStrategy::Chunked(DEFAULT_CHUNK),
        BatchStrategy::SingleBuffer,
    ] {
        let r = bench_batch(&BatchBenchConfig {
            strategy,
            duration_s,
            ..BatchBenchConfig::default()
        })?;
        println!(
            "{:<16} median {:>8.2} batches/s  p95 {:>8.2}  {:>6} transfers per batch",
            strategy.name(),
            r.median,
            r.p95,
            r.metric("transfers_per_batch").unwrap_or(0.0)
        );
        medians.push(r.median);
    }
    println!("single buffer / per point: {:.2}x", medians[2] / medians[0]);
    Ok(())
}
