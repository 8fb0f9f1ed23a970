//! Split frames into datagrams, deliver them out of order with one frame
//! damaged, and meter what comes out of the reassembler.

use asab::wire::{chunk_stream_frame, meter, Reassembler, ReassemblyEvent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let payload = vec![0xabu8; 10_000];
    let mut reasm = Reassembler::new(200);
    let mut arrivals = Vec::new();
    let mut lost = Vec::new();
    let period_ns = 33_333_333u64;

    for seq in 0..30u32 {
        let sent = seq as u64 * period_ns;
        let mut chunks = chunk_stream_frame(&payload, 7, seq, sent)?;
        chunks.reverse();
        if seq == 12 {
            // one datagram of this frame never arrives; the frames behind it
            // are held back until the gap times out
            chunks.pop();
        }
        let recv = sent + 2_000_000;
        for d in chunks {
            for ev in reasm.push_bytes(&d.encode(), recv) {
                match ev {
                    ReassemblyEvent::Delivered {
                        seq,
                        send_ts_ns,
                        payload,
                        ..
                    } => {
                        assert_eq!(payload.len(), 10_000);
                        arrivals.push((seq, send_ts_ns, recv));
                    }
                    ReassemblyEvent::Lost {
                        first_seq, count, ..
                    } => lost.extend(first_seq..first_seq + count),
                }
            }
        }
    }
    for ev in reasm.poll(u64::MAX / 2) {
        if let ReassemblyEvent::Lost {
            first_seq, count, ..
        } = ev
        {
            lost.extend(first_seq..first_seq + count);
        }
    }
    let stats = meter(&arrivals, 1.0);
    println!("delivered {} frames, lost {:?}", arrivals.len(), lost);
    println!(
        "fps {:.1}, latency mean {:.1} ms, p95 {:.1} ms, loss {:.3}",
        stats.fps,
        stats.latency_mean_s * 1e3,
        stats.latency_p95_s * 1e3,
        stats.loss_fraction
    );
    println!("counters: {:?}", reasm.counters());
    Ok(())
}
