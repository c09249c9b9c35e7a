//! Run the scheduled hybrid GEMM pipeline on a synthetic workload and
//! cross-check every output coordinate against a direct restatement of the
//! hybrid semantics: over-range partials exact, in-range partials
//! ADC-quantized.

use hybrid_attn_sim::costmodel::HardwareConfig;
use hybrid_attn_sim::harness::{fidelity_check, gen_workload, WorkloadKind, WorkloadParams};

fn main() -> hybrid_attn_sim::Result<()> {
    let params = WorkloadParams {
        seq_len: 128,
        d_k: 64,
        heads: 4,
        batch: 1,
        bits: 4,
    };
    let workload = gen_workload(WorkloadKind::Gaussian { sigma: 0.33 }, &params, 42)?;
    let hw = HardwareConfig::default();
    let (outcome, stats) = fidelity_check(&workload, &hw, 42)?;
    println!(
        "checked {} coordinates across {} heads: {} mismatches -> {}",
        outcome.coordinates_checked,
        outcome.heads_checked,
        outcome.mismatches,
        if outcome.pass { "PASS" } else { "FAIL" }
    );
    println!(
        "signals: {} total, {} flagged over-range ({:.1}%), {} recomputed digitally",
        stats.total_signals,
        stats.overres_signals,
        100.0 * stats.overres_signals as f64 / stats.total_signals.max(1) as f64,
        stats.mau_tasks
    );
    assert!(outcome.pass);
    Ok(())
}
