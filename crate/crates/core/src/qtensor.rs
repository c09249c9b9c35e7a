//! Fixed-point quantized matrices and the integer GEMM reference.
//!
//! All operands flowing through the simulator (Q, K, V, S) are symmetric
//! signed fixed-point matrices: `value = code * scale` with codes in
//! `[-(2^(b-1)-1), +(2^(b-1)-1)]`. The asymmetric minimum code is never
//! produced so negation stays closed.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SimError};

pub const QMAT_MAGIC: &[u8; 4] = b"QMAT";

/// Scale selection policy for quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePolicy {
    /// scale = max|value| / max_code; falls back to 1.0 for all-zero input.
    PerTensorMax,
    /// Use the given scale unchanged.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    pub bits: u8,
    pub scale_policy: ScalePolicy,
}

impl QuantSpec {
    pub fn new(bits: u8, scale_policy: ScalePolicy) -> Self {
        assert!((2..=16).contains(&bits), "bits must be in 2..=16");
        Self { bits, scale_policy }
    }

    pub fn four_bit() -> Self {
        Self::new(4, ScalePolicy::PerTensorMax)
    }

    /// Largest representable code magnitude, 2^(b-1) - 1.
    pub fn max_code(&self) -> i32 {
        (1 << (self.bits - 1)) - 1
    }
}

/// Dense row-major real matrix; pre-quantization inputs and oracle values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    /// Whitespace-separated text loader: first two tokens are rows and cols,
    /// followed by rows*cols reals.
    pub fn load_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut tokens = text.split_whitespace();
        let rows: usize = tokens
            .next()
            .ok_or_else(|| SimError::Format("missing row count".into()))?
            .parse()
            .map_err(|e| SimError::Format(format!("bad row count: {e}")))?;
        let cols: usize = tokens
            .next()
            .ok_or_else(|| SimError::Format("missing column count".into()))?
            .parse()
            .map_err(|e| SimError::Format(format!("bad column count: {e}")))?;
        let mut values = Vec::with_capacity(rows * cols);
        for (i, tok) in tokens.enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|e| SimError::Format(format!("bad value at entry {i}: {e}")))?;
            values.push(v);
        }
        if values.len() != rows * cols {
            return Err(SimError::Format(format!(
                "expected {} values, found {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }
}

/// Integer-coded matrix with a single per-tensor scale.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub codes: Vec<i8>,
    pub bits: u8,
    pub scale: f64,
}

impl QuantizedMatrix {
    pub fn new(rows: usize, cols: usize, codes: Vec<i8>, bits: u8, scale: f64) -> Self {
        assert_eq!(codes.len(), rows * cols);
        assert!(scale.is_finite() && scale > 0.0, "scale must be positive finite");
        let max = (1i32 << (bits - 1)) - 1;
        debug_assert!(codes.iter().all(|&c| (c as i32).abs() <= max));
        Self {
            rows,
            cols,
            codes,
            bits,
            scale,
        }
    }

    pub fn zeros(rows: usize, cols: usize, bits: u8) -> Self {
        Self::new(rows, cols, vec![0; rows * cols], bits, 1.0)
    }

    pub fn code(&self, r: usize, c: usize) -> i8 {
        self.codes[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.codes[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut codes = vec![0i8; self.codes.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                codes[c * self.rows + r] = self.code(r, c);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            codes,
            bits: self.bits,
            scale: self.scale,
        }
    }

    /// Binary QMAT layout: 16-byte header (magic "QMAT", u32 rows, u32 cols,
    /// u8 bits, 3 pad bytes), i8 codes row-major, then the f64 scale. All
    /// multi-byte fields little-endian.
    pub fn write_qmat<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(QMAT_MAGIC)?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        w.write_all(&[self.bits, 0, 0, 0])?;
        let bytes: Vec<u8> = self.codes.iter().map(|&c| c as u8).collect();
        w.write_all(&bytes)?;
        w.write_all(&self.scale.to_le_bytes())?;
        Ok(())
    }

    pub fn read_qmat<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| SimError::IoAt { offset: 0, source: e })?;
        if &header[0..4] != QMAT_MAGIC {
            return Err(SimError::Format("bad magic, expected QMAT".into()));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let bits = header[12];
        if !(2..=8).contains(&bits) {
            return Err(SimError::Format(format!("unsupported bit-width {bits}")));
        }
        let mut raw = vec![0u8; rows * cols];
        r.read_exact(&mut raw)
            .map_err(|e| SimError::IoAt { offset: 16, source: e })?;
        let codes: Vec<i8> = raw.iter().map(|&b| b as i8).collect();
        let mut scale_bytes = [0u8; 8];
        r.read_exact(&mut scale_bytes).map_err(|e| SimError::IoAt {
            offset: 16 + rows as u64 * cols as u64,
            source: e,
        })?;
        let scale = f64::from_le_bytes(scale_bytes);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(SimError::Format(format!("invalid scale {scale}")));
        }
        let max = (1i32 << (bits - 1)) - 1;
        if let Some(pos) = codes.iter().position(|&c| (c as i32).abs() > max) {
            return Err(SimError::Format(format!(
                "code {} at entry {pos} outside symmetric {bits}-bit range",
                codes[pos]
            )));
        }
        Ok(Self {
            rows,
            cols,
            codes,
            bits,
            scale,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_qmat(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        Self::read_qmat(&mut f)
    }
}

/// Exact integer GEMM result; `value = acc * scale` with i64 accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<i64>,
    pub scale: f64,
}

impl IntMatrix {
    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.values[r * self.cols + c]
    }
}

/// Round-to-nearest-even quantization with symmetric clamping.
pub fn quantize(m: &RealMatrix, spec: &QuantSpec) -> Result<QuantizedMatrix> {
    if let Some(idx) = m.values.iter().position(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteInput {
            index: idx,
            value: m.values[idx],
        });
    }
    let max_code = spec.max_code() as f64;
    let scale = match spec.scale_policy {
        ScalePolicy::Fixed(s) => s,
        ScalePolicy::PerTensorMax => {
            let max_abs = m.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            if max_abs == 0.0 {
                1.0
            } else {
                max_abs / max_code
            }
        }
    };
    let codes = m
        .values
        .iter()
        .map(|&v| {
            let c = (v / scale).round_ties_even();
            c.clamp(-max_code, max_code) as i8
        })
        .collect();
    Ok(QuantizedMatrix::new(m.rows, m.cols, codes, spec.bits, scale))
}

pub fn dequantize(q: &QuantizedMatrix) -> RealMatrix {
    RealMatrix {
        rows: q.rows,
        cols: q.cols,
        values: q.codes.iter().map(|&c| c as f64 * q.scale).collect(),
    }
}

/// Exact integer GEMM; the brute-force oracle all hybrid paths are checked
/// against. i64 accumulators cover 2b + log2(K) bits for any supported shape.
pub fn int_gemm(a: &QuantizedMatrix, b: &QuantizedMatrix) -> Result<IntMatrix> {
    if a.cols != b.rows {
        return Err(SimError::DimensionMismatch(format!(
            "{}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut values = vec![0i64; a.rows * b.cols];
    for i in 0..a.rows {
        for k in 0..a.cols {
            let av = a.code(i, k) as i64;
            if av == 0 {
                continue;
            }
            for j in 0..b.cols {
                values[i * b.cols + j] += av * b.code(k, j) as i64;
            }
        }
    }
    Ok(IntMatrix {
        rows: a.rows,
        cols: b.cols,
        values,
        scale: a.scale * b.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        RealMatrix::new(rows, cols, values)
    }

    pub(crate) fn random_quantized(rows: usize, cols: usize, bits: u8, seed: u64) -> QuantizedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max = (1i32 << (bits - 1)) - 1;
        let codes = (0..rows * cols)
            .map(|_| rng.gen_range(-max..=max) as i8)
            .collect();
        QuantizedMatrix::new(rows, cols, codes, bits, 1.0)
    }

    #[test]
    fn zero_matrix_defaults_scale_one() {
        let m = RealMatrix::zeros(2, 2);
        let q = quantize(&m, &QuantSpec::four_bit()).unwrap();
        assert!(q.codes.iter().all(|&c| c == 0));
        assert_eq!(q.scale, 1.0);
    }

    #[test]
    fn full_scale_maps_to_max_code() {
        let m = RealMatrix::new(1, 2, vec![1.0, -1.0]);
        let q = quantize(&m, &QuantSpec::four_bit()).unwrap();
        assert_eq!(q.codes, vec![7, -7]);
        assert!((q.scale - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn round_trip_error_bounded_by_half_scale() {
        let m = random_real(64, 64, 42);
        let q = quantize(&m, &QuantSpec::four_bit()).unwrap();
        let d = dequantize(&q);
        for i in 0..m.values.len() {
            let err = (d.values[i] - m.values[i]).abs();
            assert!(
                err <= q.scale / 2.0 + 1e-12,
                "entry {i}: err {err} > scale/2 {}",
                q.scale / 2.0
            );
        }
    }

    #[test]
    fn fixed_scale_round_trip_is_exact() {
        let q = random_quantized(8, 8, 4, 5);
        let d = dequantize(&q);
        let spec = QuantSpec::new(4, ScalePolicy::Fixed(q.scale));
        let q2 = quantize(&d, &spec).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn non_finite_rejected_with_index() {
        let m = RealMatrix::new(1, 3, vec![0.0, f64::NAN, 1.0]);
        match quantize(&m, &QuantSpec::four_bit()) {
            Err(SimError::NonFiniteInput { index: 1, .. }) => {}
            other => panic!("expected NonFiniteInput at 1, got {other:?}"),
        }
    }

    #[test]
    fn dequantize_simple() {
        let q = QuantizedMatrix::new(1, 2, vec![0, 0], 4, 0.5);
        assert_eq!(dequantize(&q).values, vec![0.0, 0.0]);
        let q = QuantizedMatrix::new(1, 1, vec![7], 4, 1.0 / 7.0);
        assert!((dequantize(&q).values[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gemm_identity() {
        let mut id = QuantizedMatrix::zeros(4, 4, 4);
        for i in 0..4 {
            id.codes[i * 4 + i] = 1;
        }
        let b = random_quantized(4, 4, 4, 9);
        let r = int_gemm(&id, &b).unwrap();
        for i in 0..16 {
            assert_eq!(r.values[i], b.codes[i] as i64);
        }
    }

    #[test]
    fn gemm_one_by_one() {
        let a = QuantizedMatrix::new(1, 1, vec![7], 4, 1.0);
        let b = QuantizedMatrix::new(1, 1, vec![7], 4, 1.0);
        assert_eq!(int_gemm(&a, &b).unwrap().values, vec![49]);
    }

    #[test]
    fn gemm_matches_naive_reference() {
        let a = random_quantized(64, 64, 4, 7);
        let b = random_quantized(64, 64, 4, 8);
        let r = int_gemm(&a, &b).unwrap();
        // naive triple loop, independent of the skip-zero fast path
        for i in 0..64 {
            for j in 0..64 {
                let mut acc: i64 = 0;
                for k in 0..64 {
                    acc += a.code(i, k) as i64 * b.code(k, j) as i64;
                }
                assert_eq!(r.get(i, j), acc);
            }
        }
        assert_eq!(r.scale, a.scale * b.scale);
    }

    #[test]
    fn gemm_dimension_mismatch() {
        let a = QuantizedMatrix::zeros(2, 3, 4);
        let b = QuantizedMatrix::zeros(2, 2, 4);
        assert!(int_gemm(&a, &b).is_err());
    }

    #[test]
    fn qmat_round_trip() {
        let q = random_quantized(5, 7, 4, 13);
        let mut buf = Vec::new();
        q.write_qmat(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 35 + 8);
        let q2 = QuantizedMatrix::read_qmat(&mut buf.as_slice()).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn qmat_bad_magic_rejected() {
        let mut buf = vec![0u8; 24];
        buf[0..4].copy_from_slice(b"XMAT");
        assert!(QuantizedMatrix::read_qmat(&mut buf.as_slice()).is_err());
    }
}
