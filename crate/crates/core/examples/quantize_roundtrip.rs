//! Symmetric 4-bit quantization: quantize a small real matrix, inspect the
//! codes and scale, bound the round-trip error, and round-trip the QMAT
//! binary format through a file.

use hybrid_attn_sim::qtensor::{dequantize, quantize, QuantSpec, QuantizedMatrix, RealMatrix};

fn main() -> hybrid_attn_sim::Result<()> {
    let m = RealMatrix::new(
        2,
        4,
        vec![0.9, -0.35, 0.12, -0.9, 0.51, 0.0, -0.2, 0.77],
    );
    let q = quantize(&m, &QuantSpec::four_bit())?;
    println!("scale = {:.6} (per-tensor max / 7)", q.scale);
    println!("codes = {:?}", q.codes);

    let back = dequantize(&q);
    let max_err = m
        .values
        .iter()
        .zip(&back.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("max round-trip error = {max_err:.6} (bound: scale/2 = {:.6})", q.scale / 2.0);
    assert!(max_err <= q.scale / 2.0 + 1e-12);

    let dir = std::env::temp_dir().join("quantize_roundtrip_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("m.qmat");
    q.save(&path)?;
    let loaded = QuantizedMatrix::load(&path)?;
    assert_eq!(loaded, q);
    println!("QMAT round trip through {} ok", path.display());
    Ok(())
}
