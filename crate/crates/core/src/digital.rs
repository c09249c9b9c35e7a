//! Functional model of the digital die: exact MAU recomputation of flagged
//! partial dot-products, the output accumulator, and the two-half lookup
//! table softmax unit.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::photonic::Coordinate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MauSpec {
    pub macs_per_cycle: usize,
    pub cycle_time_s: f64,
    pub input_buffer_bytes: usize,
    pub output_buffer_bytes: usize,
}

impl Default for MauSpec {
    fn default() -> Self {
        Self {
            macs_per_cycle: 8,
            cycle_time_s: 1e-9,
            input_buffer_bytes: 512,
            output_buffer_bytes: 512,
        }
    }
}

/// A flagged over-resolution partial to be recomputed exactly.
#[derive(Debug, Clone, Copy)]
pub struct RecomputeTask {
    pub coordinate: Coordinate,
}

/// Exact vector-vector MAC over one flagged K-slice. Rejects coordinates the
/// comparator never flagged; that would be a scheduler bug, not data.
/// Returns the exact partial sum and the digital cycles consumed.
pub fn mau_recompute(
    task: &RecomputeTask,
    a_slice: &[i8],
    b_slice: &[i8],
    flagged: &HashSet<Coordinate>,
    mau: &MauSpec,
) -> Result<(i64, u64)> {
    if !flagged.contains(&task.coordinate) {
        return Err(SimError::UnflaggedTask {
            row: task.coordinate.out_row,
            col: task.coordinate.out_col,
            slice: task.coordinate.k_slice,
        });
    }
    if a_slice.len() != b_slice.len() {
        return Err(SimError::DimensionMismatch(format!(
            "MAU slice lengths {} vs {}",
            a_slice.len(),
            b_slice.len()
        )));
    }
    let sum: i64 = a_slice
        .iter()
        .zip(b_slice.iter())
        .map(|(&a, &b)| a as i64 * b as i64)
        .sum();
    let cycles = a_slice.len().div_ceil(mau.macs_per_cycle) as u64;
    Ok((sum, cycles))
}

/// Domain floor of the 16-bit fixed-point softmax argument (8 fractional
/// bits): arguments below -128.0 flush to zero.
pub const ARG_FRACTION_BITS: u32 = 8;
pub const ARG_FLOOR: f64 = -128.0;

/// Two 256-entry 8-bit tables implementing exp(a) for a in [-128, 0] as
/// exp(-hi) * exp(-lo/256), one table per half of the argument. 512 bytes
/// total.
#[derive(Debug, Clone)]
pub struct SoftmaxLut {
    pub hi_table: [u8; 256],
    pub lo_table: [u8; 256],
}

impl Default for SoftmaxLut {
    fn default() -> Self {
        Self::new()
    }
}

impl SoftmaxLut {
    pub fn new() -> Self {
        let mut hi_table = [0u8; 256];
        let mut lo_table = [0u8; 256];
        for i in 0..256 {
            hi_table[i] = ((-(i as f64)).exp() * 255.0).round() as u8;
            lo_table[i] = ((-(i as f64) / 256.0).exp() * 255.0).round() as u8;
        }
        Self { hi_table, lo_table }
    }

    pub fn size_bytes(&self) -> usize {
        self.hi_table.len() + self.lo_table.len()
    }

    /// Quantize a real argument to the 16-bit fixed-point format. Positive
    /// arguments are rejected (max-subtraction must have run); arguments
    /// below the domain floor flush to zero (None).
    pub fn quantize_arg(&self, a: f64) -> Result<Option<i16>> {
        if a > 0.0 {
            return Err(SimError::PositiveExpArg(a));
        }
        let q = (a * 256.0).round();
        if q < i16::MIN as f64 {
            return Ok(None);
        }
        Ok(Some(q as i16))
    }

    /// Table product for a non-positive fixed-point argument. The split into
    /// upper and lower halves is exact by construction.
    pub fn lut_exp(&self, arg: i16) -> Result<f64> {
        if arg > 0 {
            return Err(SimError::PositiveExpArg(arg as f64 / 256.0));
        }
        let n = -(arg as i32) as u32;
        let hi = (n >> 8) as usize;
        let lo = (n & 0xff) as usize;
        Ok(self.hi_table[hi] as f64 / 255.0 * (self.lo_table[lo] as f64 / 255.0))
    }

    /// Quantize-then-lookup convenience for real arguments.
    pub fn exp_approx(&self, a: f64) -> Result<f64> {
        match self.quantize_arg(a)? {
            Some(q) => self.lut_exp(q),
            None => Ok(0.0),
        }
    }

    /// One entry per line, hi table then lo table.
    pub fn dump_hex(&self) -> String {
        let mut s = String::with_capacity(512 * 3);
        for e in self.hi_table.iter().chain(self.lo_table.iter()) {
            s.push_str(&format!("{e:02x}\n"));
        }
        s
    }
}

/// LUT-based softmax over one integer score row. Arguments are
/// (s_i - max) * scale / sqrt(d_k), numerators come from the LUT, the final
/// normalization is an exact real division.
pub fn softmax_row(scores: &[i64], scale: f64, d_k: usize, lut: &SoftmaxLut) -> Result<Vec<f64>> {
    let reals: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    softmax_row_scaled(&reals, scale, d_k, lut)
}

/// Same as `softmax_row` for scores already in analog units (non-integral
/// when the ADC lsb is fractional).
pub fn softmax_row_scaled(
    scores: &[f64],
    scale: f64,
    d_k: usize,
    lut: &SoftmaxLut,
) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(SimError::EmptyInput("softmax row".into()));
    }
    assert!(d_k > 0);
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let arg_scale = scale / (d_k as f64).sqrt();
    let mut numerators = Vec::with_capacity(scores.len());
    for &s in scores {
        let a = (s - max) * arg_scale;
        numerators.push(lut.exp_approx(a)?);
    }
    let denom: f64 = numerators.iter().sum();
    let mut probs: Vec<f64> = numerators.iter().map(|n| n / denom).collect();
    normalize_exact(&mut probs);
    Ok(probs)
}

/// Force the row sum to exactly 1.0 in f64 by folding the residual into the
/// largest entry.
fn normalize_exact(probs: &mut [f64]) {
    let argmax = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    // coarse step: fold the bulk of the residual into the largest entry
    let sum: f64 = probs.iter().sum();
    probs[argmax] += 1.0 - sum;
    // fine steps: walk one entry at a time by single ulps toward a sum of
    // exactly 1.0. Rounding cascades inside the left-to-right summation can
    // make a single knob oscillate around 1.0 without ever landing on it;
    // when that happens, switch to the next-largest entry, whose different
    // position re-randomizes the cascade.
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    for knob in order {
        let mut last_sign = 0i8;
        for _ in 0..10_000 {
            let sum: f64 = probs.iter().sum();
            if sum == 1.0 {
                return;
            }
            let sign = if sum < 1.0 { 1 } else { -1 };
            if last_sign != 0 && sign != last_sign {
                break; // overshot 1.0 with this knob; try another entry
            }
            last_sign = sign;
            probs[knob] = if sign > 0 {
                f64::from_bits(probs[knob].to_bits() + 1)
            } else {
                f64::from_bits(probs[knob].to_bits() - 1)
            };
        }
    }
}

/// One K-slice contribution to an output coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceContribution {
    /// ADC code for a low-resolution signal; worth code * lsb.
    LowRes(i32),
    /// Exact integer partial recomputed on the digital die.
    OverRes(i64),
}

/// Collects per-slice contributions for an output tile and refuses to
/// finish while any slice is missing.
#[derive(Debug, Clone)]
pub struct Accumulator {
    rows: usize,
    cols: usize,
    n_slices: usize,
    lsb: f64,
    sums: Vec<f64>,
    present: Vec<bool>,
}

impl Accumulator {
    pub fn new(rows: usize, cols: usize, n_slices: usize, lsb: f64) -> Self {
        Self {
            rows,
            cols,
            n_slices,
            lsb,
            sums: vec![0.0; rows * cols],
            present: vec![false; rows * cols * n_slices],
        }
    }

    pub fn record(&mut self, row: usize, col: usize, slice: usize, c: SliceContribution) {
        debug_assert!(row < self.rows && col < self.cols && slice < self.n_slices);
        let v = match c {
            SliceContribution::LowRes(code) => code as f64 * self.lsb,
            SliceContribution::OverRes(exact) => exact as f64,
        };
        self.sums[row * self.cols + col] += v;
        self.present[(row * self.cols + col) * self.n_slices + slice] = true;
    }

    pub fn finish(self) -> Result<Vec<f64>> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                for s in 0..self.n_slices {
                    if !self.present[(r * self.cols + c) * self.n_slices + s] {
                        return Err(SimError::MissingSlice {
                            row: r,
                            col: c,
                            slice: s,
                        });
                    }
                }
            }
        }
        Ok(self.sums)
    }
}
