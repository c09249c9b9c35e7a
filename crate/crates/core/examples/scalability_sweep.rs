//! Two scalability views: latency/energy across sequence lengths at a fixed
//! tile count, and HBM traffic across tile counts at a fixed workload.
//! Spare tiles replicate operand shards, so adding tiles trades memory
//! traffic for cycles.

use hybrid_attn_sim::costmodel::{attention_useful_ops, sweep_tiles, CostReport, HardwareConfig};
use hybrid_attn_sim::dataflow::run_attention;
use hybrid_attn_sim::harness::{gen_workload, WorkloadKind, WorkloadParams};

fn main() -> hybrid_attn_sim::Result<()> {
    let hw = HardwareConfig::default();

    println!("sequence-length sweep ({} tiles):", hw.tiles);
    println!("{:>8} {:>8} {:>14} {:>14} {:>12}", "seq_len", "cycles", "latency_s", "energy_j", "hbm_bytes");
    for seq in [128usize, 256, 512] {
        let params = WorkloadParams {
            seq_len: seq,
            d_k: 64,
            heads: 2,
            batch: 1,
            bits: 4,
        };
        let w = gen_workload(WorkloadKind::Bounded, &params, 11)?;
        let run = run_attention(&w, &hw, 11)?;
        let report = CostReport::build(&hw, &run.trace, attention_useful_ops(&w))?;
        println!(
            "{:>8} {:>8} {:>14.4e} {:>14.4e} {:>12}",
            seq,
            run.trace.records.len(),
            report.latency_s,
            report.energy_j,
            run.trace.total_hbm_bytes()
        );
    }

    let params = WorkloadParams {
        seq_len: 512,
        d_k: 64,
        heads: 1,
        batch: 1,
        bits: 4,
    };
    let w = gen_workload(WorkloadKind::Bounded, &params, 11)?;
    println!();
    println!("tile-count sweep (seq_len {}):", params.seq_len);
    println!("{:>8} {:>14} {:>14} {:>12}", "tiles", "latency_s", "energy_j", "hbm_bytes");
    for (tiles, report, hbm) in sweep_tiles(&w, &hw, &[8, 16, 32, 64], 11)? {
        println!(
            "{:>8} {:>14.4e} {:>14.4e} {:>12}",
            tiles, report.latency_s, report.energy_j, hbm
        );
    }
    Ok(())
}
