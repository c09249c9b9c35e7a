//! Classify the analog partial sums of a synthetic attention workload by
//! ADC resolution: what fraction of signals fits within a b-bit converter's
//! full-scale range, for b in {2, 4, 8}?

use hybrid_attn_sim::harness::{gen_workload, WorkloadKind, WorkloadParams};
use hybrid_attn_sim::photonic::{partial_sums, resolution_histogram};

fn main() -> hybrid_attn_sim::Result<()> {
    let params = WorkloadParams {
        seq_len: 128,
        d_k: 64,
        heads: 8,
        batch: 1,
        bits: 4,
    };
    for (label, kind) in [
        ("dense gaussian", WorkloadKind::Gaussian { sigma: 0.33 }),
        ("sparse bounded", WorkloadKind::Bounded),
    ] {
        let w = gen_workload(kind, &params, 7)?;
        let mut signals = Vec::new();
        for head in &w.operands {
            signals.extend(partial_sums(&head.q, &head.k.transpose(), 64)?);
        }
        println!("{label} ({} partial sums):", signals.len());
        for (bits, frac) in resolution_histogram(&signals, &[2, 4, 8])? {
            println!("  {bits}-bit ADC covers {:.2}% of signals", 100.0 * frac);
        }
    }
    Ok(())
}
