//! Streaming transports: naive framed TCP versus chunked UDP on loopback.

use asab::bench::{bench_stream, reference_table, StreamBenchConfig, StreamTransport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = StreamBenchConfig::default();
    let naive = bench_stream(&StreamBenchConfig {
        transport: StreamTransport::NaivePerMessage,
        ..base
    })?;
    let chunked = bench_stream(&StreamBenchConfig {
        transport: StreamTransport::ChunkedDatagram,
        ..base
    })?;
    print!("{}", reference_table(&naive, &chunked));
    for r in [&naive, &chunked] {
        println!(
            "{}: median {:.6} s, p95 {:.6} s, loss {:.3}",
            r.bench,
            r.median,
            r.p95,
            r.metric("loss_fraction").unwrap_or(0.0)
        );
    }
    Ok(())
}
