//! The digital die's two-half lookup-table exponential: 512 bytes of table
//! split the fixed-point argument into an integer half and a fractional
//! half, so exp(-x) = hi[i] * lo[j]. Sweep the approximation error and run
//! a softmax row through it.

use hybrid_attn_sim::digital::{softmax_row, SoftmaxLut};

fn main() -> hybrid_attn_sim::Result<()> {
    let lut = SoftmaxLut::new();
    println!("hi table head: {:?}", &lut.hi_table[..8]);
    println!("lo table head: {:?}", &lut.lo_table[..8]);

    let mut max_err = 0.0f64;
    let samples = 10_000;
    for i in 0..samples {
        let x = -16.0 * i as f64 / (samples - 1) as f64;
        let err = (lut.exp_approx(x)? - x.exp()).abs();
        max_err = max_err.max(err);
    }
    println!(
        "max |lut_exp - exp| over {samples} points in [-16, 0]: {max_err:.6} (bound 2^-6 = {:.6})",
        (2.0f64).powi(-6)
    );
    assert!(max_err <= (2.0f64).powi(-6));

    let scores = vec![12i64, -3, 7, 7, 0];
    let probs = softmax_row(&scores, 0.25, 64, &lut)?;
    println!("softmax({scores:?}) = {probs:?}");
    println!("sum = {} (exactly 1 after residual normalization)", probs.iter().sum::<f64>());
    assert_eq!(probs.iter().sum::<f64>(), 1.0);
    Ok(())
}
