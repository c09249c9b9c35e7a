//! Functional model of the photonic die: optical dot-products, the crossbar
//! GEMM tile, low-resolution ADC conversion with saturation, the analog
//! comparator, and the coordinate register for over-resolution signals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::qtensor::QuantizedMatrix;

/// Low-resolution ADC parameters. `full_scale = max_code * lsb` is the
/// largest |analog| value converted without saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcSpec {
    pub bits: u8,
    /// Analog units per code step; default 1 integer-product unit so a 4-bit
    /// ADC resolves exact partial sums in [-7, +7].
    pub lsb: f64,
    pub count_per_array: usize,
    pub conversion_time_s: f64,
}

impl Default for AdcSpec {
    fn default() -> Self {
        Self {
            bits: 4,
            lsb: 1.0,
            count_per_array: 32,
            conversion_time_s: 1e-9,
        }
    }
}

impl AdcSpec {
    pub fn max_code(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    pub fn full_scale(&self) -> f64 {
        self.max_code() as f64 * self.lsb
    }

    /// Effectively unbounded range; every signal classifies LowRes and
    /// converts without saturation.
    pub fn unbounded() -> Self {
        Self {
            bits: 62,
            lsb: 1.0,
            count_per_array: 32,
            conversion_time_s: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdacSpec {
    pub bits: u8,
    pub modulation_time_s: f64,
    pub count: usize,
}

impl Default for PdacSpec {
    fn default() -> Self {
        Self {
            bits: 4,
            modulation_time_s: 1e-9,
            count: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DptcSpec {
    pub n_v: usize,
    pub n_h: usize,
    pub op_time_s: f64,
    /// Additive Gaussian noise on each analog partial; 0 disables noise.
    pub noise_sigma: f64,
}

impl Default for DptcSpec {
    fn default() -> Self {
        Self {
            n_v: 64,
            n_h: 64,
            op_time_s: 1e-9,
            noise_sigma: 0.0,
        }
    }
}

/// Packed (row, col, k-slice) of a flagged partial; 4 bytes in the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coordinate {
    pub out_row: usize,
    pub out_col: usize,
    pub k_slice: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    LowRes,
    OverRes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorOutcome {
    pub classification: Classification,
    pub coordinate: Coordinate,
}

/// Per-Tile buffer of flagged coordinates. When full, the resident batch is
/// spilled to shared SRAM; nothing is ever dropped.
#[derive(Debug, Clone)]
pub struct CoordinateRegister {
    pub capacity_bytes: usize,
    pub entry_size_bytes: usize,
    pub entries: Vec<Coordinate>,
    pub spilled: Vec<Coordinate>,
    pub spill_count: usize,
}

impl Default for CoordinateRegister {
    fn default() -> Self {
        Self::new(8192)
    }
}

impl CoordinateRegister {
    pub fn new(capacity_bytes: usize) -> Self {
        Self {
            capacity_bytes,
            entry_size_bytes: 4,
            entries: Vec::new(),
            spilled: Vec::new(),
            spill_count: 0,
        }
    }

    pub fn capacity_entries(&self) -> usize {
        self.capacity_bytes / self.entry_size_bytes
    }

    pub fn push(&mut self, coord: Coordinate) {
        if self.entries.len() >= self.capacity_entries() {
            self.spilled.append(&mut self.entries);
            self.spill_count += 1;
        }
        self.entries.push(coord);
    }

    pub fn total_logged(&self) -> usize {
        self.entries.len() + self.spilled.len()
    }

    /// Extra cycles spent spilling: one per 32 spilled entries.
    pub fn spill_cycles(&self) -> usize {
        self.spilled.len().div_ceil(32)
    }

    /// All logged coordinates in arrival order.
    pub fn drain_all(&mut self) -> Vec<Coordinate> {
        let mut out = std::mem::take(&mut self.spilled);
        out.append(&mut self.entries);
        out
    }
}

/// Seeded Gaussian noise stream owned by one simulator instance.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sigma).unwrap().sample(&mut self.rng)
    }
}

/// Optical dot product: photocurrent proportional to the accumulated
/// per-wavelength intensities, in integer-product units.
pub fn ddot(x: &[i8], y: &[i8], noise_sigma: f64, noise: &mut NoiseSource) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SimError::DimensionMismatch(format!(
            "ddot lengths {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let exact: i64 = x
        .iter()
        .zip(y.iter())
        .map(|(&a, &b)| a as i64 * b as i64)
        .sum();
    Ok(exact as f64 + noise.sample(noise_sigma))
}

/// One crossbar array operation: an n_v x k tile against a k x n_h tile,
/// producing the full analog output tile. Partitioning oversized operands is
/// the caller's job.
pub fn dptc_tile_op(
    a_tile: &QuantizedMatrix,
    b_tile: &QuantizedMatrix,
    spec: &DptcSpec,
    noise: &mut NoiseSource,
) -> Result<Vec<f64>> {
    if a_tile.rows > spec.n_v || b_tile.cols > spec.n_h || a_tile.cols > spec.n_h {
        return Err(SimError::TileTooLarge {
            rows: a_tile.rows.max(a_tile.cols),
            cols: b_tile.cols,
            n_v: spec.n_v,
            n_h: spec.n_h,
        });
    }
    if a_tile.cols != b_tile.rows {
        return Err(SimError::DimensionMismatch(format!(
            "tile K {} vs {}",
            a_tile.cols, b_tile.rows
        )));
    }
    let mut out = vec![0.0; a_tile.rows * b_tile.cols];
    let bt = b_tile.transpose();
    for i in 0..a_tile.rows {
        for j in 0..b_tile.cols {
            out[i * b_tile.cols + j] = ddot(a_tile.row(i), bt.row(j), spec.noise_sigma, noise)?;
        }
    }
    Ok(out)
}

/// Quantize one analog sample: clamp(round(analog / lsb)) with ties away
/// from zero. Saturation is a result, not an error.
pub fn adc_convert(analog: f64, adc: &AdcSpec) -> (i32, bool) {
    let raw = (analog / adc.lsb).round(); // f64::round ties away from zero
    let max = adc.max_code() as f64;
    let clamped = raw.clamp(-max, max);
    (clamped as i32, raw != clamped)
}

/// Comparator at the ADC input: flags any |analog| above the full-scale
/// range and logs its coordinate; low-resolution signals proceed to the ADC.
pub fn classify(
    analog: f64,
    adc: &AdcSpec,
    coord: Coordinate,
    register: &mut CoordinateRegister,
) -> ComparatorOutcome {
    let classification = if analog.abs() > adc.full_scale() {
        register.push(coord);
        Classification::OverRes
    } else {
        Classification::LowRes
    };
    ComparatorOutcome {
        classification,
        coordinate: coord,
    }
}

/// Exact per-K-slice partial sums of a * b, the signal population seen by
/// the comparator/ADC. Slices of depth `k_slice`, last slice ragged.
pub fn partial_sums(a: &QuantizedMatrix, b: &QuantizedMatrix, k_slice: usize) -> Result<Vec<i64>> {
    if a.cols != b.rows {
        return Err(SimError::DimensionMismatch(format!(
            "{}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let slices = a.cols.div_ceil(k_slice);
    let mut out = Vec::with_capacity(a.rows * b.cols * slices);
    for i in 0..a.rows {
        for j in 0..b.cols {
            for s in 0..slices {
                let k0 = s * k_slice;
                let k1 = (k0 + k_slice).min(a.cols);
                let mut acc = 0i64;
                for k in k0..k1 {
                    acc += a.code(i, k) as i64 * b.code(k, j) as i64;
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// Fraction of partial dot-product signals within the full-scale range of
/// each candidate ADC bit-width (lsb = 1 integer unit).
pub fn resolution_histogram(signals: &[i64], bits_list: &[u8]) -> Result<Vec<(u8, f64)>> {
    if signals.is_empty() {
        return Err(SimError::EmptyInput("resolution histogram workload".into()));
    }
    if bits_list.is_empty() {
        return Err(SimError::EmptyInput("bits list".into()));
    }
    let mut out = Vec::with_capacity(bits_list.len());
    for &bits in bits_list {
        let full_scale = (1i64 << (bits - 1)) - 1;
        let within = signals.iter().filter(|&&s| s.abs() <= full_scale).count();
        out.push((bits, within as f64 / signals.len() as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtensor::int_gemm;
    use rand::{Rng, SeedableRng};

    fn random_codes(n: usize, seed: u64) -> Vec<i8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-7..=7)).collect()
    }

    #[test]
    fn ddot_zero_vectors() {
        let mut noise = NoiseSource::new(0);
        let z = vec![0i8; 64];
        assert_eq!(ddot(&z, &z, 0.0, &mut noise).unwrap(), 0.0);
    }

    #[test]
    fn ddot_single_wavelength_pair() {
        let mut noise = NoiseSource::new(0);
        let mut x = vec![0i8; 64];
        x[3] = 7;
        assert_eq!(ddot(&x, &x, 0.0, &mut noise).unwrap(), 49.0);
    }

    #[test]
    fn ddot_matches_integer_oracle() {
        let mut noise = NoiseSource::new(11);
        let x = random_codes(64, 11);
        let y = random_codes(64, 12);
        let got = ddot(&x, &y, 0.0, &mut noise).unwrap();
        let a = QuantizedMatrix::new(1, 64, x, 4, 1.0);
        let b = QuantizedMatrix::new(64, 1, y, 4, 1.0);
        let expected = int_gemm(&a, &b).unwrap().values[0];
        assert_eq!(got, expected as f64);
    }

    #[test]
    fn ddot_length_mismatch() {
        let mut noise = NoiseSource::new(0);
        assert!(ddot(&[1, 2], &[1], 0.0, &mut noise).is_err());
    }

    #[test]
    fn tile_op_zero_input() {
        let mut noise = NoiseSource::new(0);
        let a = QuantizedMatrix::zeros(64, 64, 4);
        let b = QuantizedMatrix::zeros(64, 64, 4);
        let out = dptc_tile_op(&a, &b, &DptcSpec::default(), &mut noise).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tile_op_identity_passthrough() {
        let mut noise = NoiseSource::new(0);
        let mut a = QuantizedMatrix::zeros(2, 2, 4);
        a.codes = vec![1, 0, 0, 1];
        let b = QuantizedMatrix::new(2, 2, vec![3, -2, 5, 7], 4, 1.0);
        let out = dptc_tile_op(&a, &b, &DptcSpec::default(), &mut noise).unwrap();
        assert_eq!(out, vec![3.0, -2.0, 5.0, 7.0]);
    }

    #[test]
    fn tile_op_matches_gemm_oracle() {
        let mut noise = NoiseSource::new(3);
        let a = QuantizedMatrix::new(64, 64, random_codes(4096, 3), 4, 1.0);
        let b = QuantizedMatrix::new(64, 64, random_codes(4096, 4), 4, 1.0);
        let out = dptc_tile_op(&a, &b, &DptcSpec::default(), &mut noise).unwrap();
        let oracle = int_gemm(&a, &b).unwrap();
        for i in 0..out.len() {
            assert_eq!(out[i], oracle.values[i] as f64);
        }
    }

    #[test]
    fn tile_op_rejects_oversized() {
        let mut noise = NoiseSource::new(0);
        let a = QuantizedMatrix::zeros(65, 64, 4);
        let b = QuantizedMatrix::zeros(64, 64, 4);
        assert!(dptc_tile_op(&a, &b, &DptcSpec::default(), &mut noise).is_err());
    }

    #[test]
    fn adc_zero_and_saturation() {
        let adc = AdcSpec::default();
        assert_eq!(adc_convert(0.0, &adc), (0, false));
        assert_eq!(adc_convert(100.0, &adc), (7, true));
        assert_eq!(adc_convert(-100.0, &adc), (-7, true));
    }

    #[test]
    fn adc_sweep_matches_clamp_round_table() {
        let adc = AdcSpec::default();
        let mut v = -10.0;
        while v <= 10.0 {
            let (code, sat) = adc_convert(v, &adc);
            // independent restatement of the definition
            let r = if v >= 0.0 { (v + 0.5).floor() } else { (v - 0.5).ceil() };
            let expect_code = r.clamp(-7.0, 7.0) as i32;
            let expect_sat = r.abs() > 7.0;
            assert_eq!((code, sat), (expect_code, expect_sat), "at {v}");
            v += 0.25;
        }
    }

    #[test]
    fn classify_thresholds() {
        let adc = AdcSpec::default();
        let mut reg = CoordinateRegister::default();
        let coord = Coordinate {
            out_row: 0,
            out_col: 0,
            k_slice: 0,
        };
        let low = classify(6.0, &adc, coord, &mut reg);
        assert_eq!(low.classification, Classification::LowRes);
        assert_eq!(reg.total_logged(), 0);
        let over = classify(8.0, &adc, coord, &mut reg);
        assert_eq!(over.classification, Classification::OverRes);
        assert_eq!(reg.total_logged(), 1);
        // boundary: exactly full scale stays LowRes
        let edge = classify(7.0, &adc, coord, &mut reg);
        assert_eq!(edge.classification, Classification::LowRes);
    }

    #[test]
    fn lowres_never_saturates() {
        let adc = AdcSpec::default();
        let mut reg = CoordinateRegister::default();
        for i in -70..=70 {
            let v = i as f64 / 10.0;
            let coord = Coordinate {
                out_row: 0,
                out_col: 0,
                k_slice: 0,
            };
            let c = classify(v, &adc, coord, &mut reg);
            if c.classification == Classification::LowRes {
                let (_, sat) = adc_convert(v, &adc);
                assert!(!sat, "LowRes signal {v} saturated");
            }
        }
    }

    #[test]
    fn register_spills_without_loss() {
        let mut reg = CoordinateRegister::new(16); // 4 entries
        for i in 0..10 {
            reg.push(Coordinate {
                out_row: i,
                out_col: 0,
                k_slice: 0,
            });
        }
        assert_eq!(reg.total_logged(), 10);
        assert_eq!(reg.spill_count, 2);
        let all = reg.drain_all();
        assert_eq!(all.len(), 10);
        for (i, c) in all.iter().enumerate() {
            assert_eq!(c.out_row, i);
        }
    }

    #[test]
    fn histogram_zero_workload_is_all_ones() {
        let signals = vec![0i64; 100];
        let h = resolution_histogram(&signals, &[2, 4, 8]).unwrap();
        assert!(h.iter().all(|&(_, f)| f == 1.0));
    }

    #[test]
    fn histogram_monotone_in_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let signals: Vec<i64> = (0..10_000).map(|_| rng.gen_range(-200..=200)).collect();
        let h = resolution_histogram(&signals, &[2, 4, 8]).unwrap();
        assert!(h[0].1 <= h[1].1 && h[1].1 <= h[2].1);
    }

    #[test]
    fn histogram_matches_direct_scan() {
        // synthetic attention-shaped workload: seq 128, d_k 64
        let a = QuantizedMatrix::new(128, 64, random_codes(128 * 64, 21), 4, 1.0);
        let b = QuantizedMatrix::new(64, 128, random_codes(64 * 128, 22), 4, 1.0);
        let signals = partial_sums(&a, &b, 64).unwrap();
        let h = resolution_histogram(&signals, &[4]).unwrap();
        let within = signals.iter().filter(|s| s.abs() <= 7).count();
        assert_eq!(h[0].1, within as f64 / signals.len() as f64);
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let mut n1 = NoiseSource::new(99);
        let mut n2 = NoiseSource::new(99);
        for _ in 0..100 {
            assert_eq!(n1.sample(0.5), n2.sample(0.5));
        }
    }
}
