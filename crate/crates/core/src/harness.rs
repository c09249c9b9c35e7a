//! Workload generation and ingestion, experiment orchestration, and report
//! emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costmodel::{
    attention_useful_ops, compare, derive_baseline, parse_config_text, sweep_tiles,
    to_config_text, Comparison, CostReport, HardwareConfig,
};
use crate::dataflow::{
    hybrid_gemm, run_attention, AttentionWorkload, HeadOperands, ResultSink, SignalStats,
};
use crate::error::{Result, SimError};
use crate::photonic::{adc_convert, partial_sums, resolution_histogram, NoiseSource};
use crate::qtensor::{quantize, QuantSpec, QuantizedMatrix, RealMatrix, ScalePolicy};

/// Synthetic operand distributions standing in for real model activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WorkloadKind {
    /// i.i.d. N(0, sigma^2) entries, quantized per tensor.
    Gaussian { sigma: f64 },
    /// i.i.d. uniform in [-range, range].
    Uniform { range: f64 },
    /// Sparse outlier-dominated operands whose analog partial sums provably
    /// stay within the 4-bit full scale, so no signal is flagged over-range.
    /// Q and K rows carry at most 7 nonzero +/-1 codes; V places one nonzero
    /// per 64-row slice of each column.
    Bounded,
}

/// Default Gaussian spread: operands mostly in [-1, 1] with a nontrivial
/// over-resolution fraction at 4-bit.
pub const DEFAULT_SIGMA: f64 = 0.33;

#[derive(Debug, Clone)]
pub struct WorkloadParams {
    pub seq_len: usize,
    pub d_k: usize,
    pub heads: usize,
    pub batch: usize,
    pub bits: u8,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            seq_len: 128,
            d_k: 64,
            heads: 12,
            batch: 1,
            bits: 4,
        }
    }
}

/// Deterministic synthetic workload: same seed, bit-identical operands.
pub fn gen_workload(kind: WorkloadKind, params: &WorkloadParams, seed: u64) -> Result<AttentionWorkload> {
    if kind == WorkloadKind::Bounded {
        return gen_bounded_workload(params, seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = QuantSpec::new(params.bits, ScalePolicy::PerTensorMax);
    let n = params.seq_len * params.d_k;
    let draw = |rng: &mut ChaCha8Rng| -> Result<QuantizedMatrix> {
        let values: Vec<f64> = match kind {
            WorkloadKind::Gaussian { sigma } => {
                if sigma == 0.0 {
                    vec![0.0; n]
                } else {
                    let dist = Normal::new(0.0, sigma).map_err(|e| SimError::Config {
                        location: "sigma".into(),
                        message: e.to_string(),
                    })?;
                    (0..n).map(|_| dist.sample(rng)).collect()
                }
            }
            WorkloadKind::Uniform { range } => {
                if range == 0.0 {
                    vec![0.0; n]
                } else {
                    let dist = Uniform::new_inclusive(-range, range);
                    (0..n).map(|_| dist.sample(rng)).collect()
                }
            }
            WorkloadKind::Bounded => unreachable!("handled above"),
        };
        quantize(&RealMatrix::new(params.seq_len, params.d_k, values), &spec)
    };
    let mut operands = Vec::with_capacity(params.heads * params.batch);
    for _ in 0..params.heads * params.batch {
        operands.push(HeadOperands {
            q: draw(&mut rng)?,
            k: draw(&mut rng)?,
            v: draw(&mut rng)?,
        });
    }
    Ok(AttentionWorkload {
        seq_len: params.seq_len,
        d_k: params.d_k,
        heads: params.heads,
        batch: params.batch,
        operands,
    })
}

/// K-slice depth the bounded generator assumes; matches the default 64x64
/// crossbar depth.
const BOUNDED_SLICE: usize = 64;

/// See [`WorkloadKind::Bounded`]. Per 64-deep K-slice, a score partial is a
/// sum of at most 7 products of +/-1 codes (|sum| <= 7 = the 4-bit full
/// scale), and a probability-weighted partial touches exactly one +/-1 V
/// code (|sum| <= the largest probability code, 7). Neither GEMM can flag.
pub fn gen_bounded_workload(params: &WorkloadParams, seed: u64) -> Result<AttentionWorkload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (seq, d_k) = (params.seq_len, params.d_k);
    let nnz = 7.min(d_k);
    let sparse_rows = |rng: &mut ChaCha8Rng| -> QuantizedMatrix {
        let mut codes = vec![0i8; seq * d_k];
        for r in 0..seq {
            for _ in 0..nnz {
                let c = rng.gen_range(0..d_k);
                codes[r * d_k + c] = if rng.gen_bool(0.5) { 1 } else { -1 };
            }
        }
        QuantizedMatrix::new(seq, d_k, codes, params.bits, 1.0 / 7.0)
    };
    let mut operands = Vec::with_capacity(params.heads * params.batch);
    for _ in 0..params.heads * params.batch {
        let q = sparse_rows(&mut rng);
        let k = sparse_rows(&mut rng);
        let mut v_codes = vec![0i8; seq * d_k];
        for r in 0..seq {
            for c in 0..d_k {
                if r % BOUNDED_SLICE == c % BOUNDED_SLICE {
                    v_codes[r * d_k + c] = if rng.gen_bool(0.5) { 1 } else { -1 };
                }
            }
        }
        let v = QuantizedMatrix::new(seq, d_k, v_codes, params.bits, 1.0 / 7.0);
        operands.push(HeadOperands { q, k, v });
    }
    Ok(AttentionWorkload {
        seq_len: seq,
        d_k,
        heads: params.heads,
        batch: params.batch,
        operands,
    })
}

/// Load a single-head workload from three QMAT files.
pub fn load_workload_files(q: &Path, k: &Path, v: &Path) -> Result<AttentionWorkload> {
    let q = QuantizedMatrix::load(q)?;
    let k = QuantizedMatrix::load(k)?;
    let v = QuantizedMatrix::load(v)?;
    if q.rows != k.rows || q.cols != k.cols || q.rows != v.rows || q.cols != v.cols {
        return Err(SimError::DimensionMismatch(
            "Q, K, V must share one seq_len x d_k shape".into(),
        ));
    }
    Ok(AttentionWorkload {
        seq_len: q.rows,
        d_k: q.cols,
        heads: 1,
        batch: 1,
        operands: vec![HeadOperands { q, k, v }],
    })
}

/// Human-readable workload description file: `key = value` lines.
#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub params: WorkloadParams,
    pub kind: WorkloadKind,
    pub seed: u64,
    pub files: Option<(PathBuf, PathBuf, PathBuf)>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            params: WorkloadParams::default(),
            kind: WorkloadKind::Gaussian {
                sigma: DEFAULT_SIGMA,
            },
            seed: 0,
            files: None,
        }
    }
}

impl WorkloadSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = WorkloadSpec::default();
        let mut sigma = DEFAULT_SIGMA;
        let mut range = 1.0;
        let mut kind = "gaussian".to_string();
        let mut source = "synthetic".to_string();
        let mut paths: BTreeMap<String, PathBuf> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SimError::Config {
                location: format!("workload line {}", lineno + 1),
                message: format!("expected key = value, found {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |e: &dyn std::fmt::Display| SimError::Config {
                location: format!("workload line {}, {}", lineno + 1, key),
                message: e.to_string(),
            };
            match key {
                "seq_len" => spec.params.seq_len = value.parse().map_err(|e| bad(&e))?,
                "d_k" => spec.params.d_k = value.parse().map_err(|e| bad(&e))?,
                "heads" => spec.params.heads = value.parse().map_err(|e| bad(&e))?,
                "batch" => spec.params.batch = value.parse().map_err(|e| bad(&e))?,
                "bits" => spec.params.bits = value.parse().map_err(|e| bad(&e))?,
                "seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
                "sigma" => sigma = value.parse().map_err(|e| bad(&e))?,
                "range" => range = value.parse().map_err(|e| bad(&e))?,
                "kind" => kind = value.to_string(),
                "source" => source = value.to_string(),
                "q_path" | "k_path" | "v_path" => {
                    paths.insert(key.to_string(), PathBuf::from(value));
                }
                other => {
                    return Err(SimError::Config {
                        location: format!("workload line {}", lineno + 1),
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        spec.kind = match kind.as_str() {
            "gaussian" => WorkloadKind::Gaussian { sigma },
            "bounded" => WorkloadKind::Bounded,
            "uniform" => WorkloadKind::Uniform { range },
            other => {
                return Err(SimError::Config {
                    location: "workload kind".into(),
                    message: format!("unknown kind {other:?}"),
                })
            }
        };
        if source == "files" {
            let get = |k: &str| {
                paths.get(k).cloned().ok_or_else(|| SimError::Config {
                    location: format!("workload {k}"),
                    message: "required when source = files".into(),
                })
            };
            spec.files = Some((get("q_path")?, get("k_path")?, get("v_path")?));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn realize(&self) -> Result<AttentionWorkload> {
        match &self.files {
            Some((q, k, v)) => load_workload_files(q, k, v),
            None => gen_workload(self.kind, &self.params, self.seed),
        }
    }
}

/// Which analysis an experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    Fidelity,
    Histogram { bits: Vec<u8> },
    Cost,
    Compare,
    SweepTiles { tiles: Vec<usize> },
    SweepSeqLen { seq_lens: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub workload: WorkloadSpec,
    pub hardware: HardwareConfig,
    pub mode: Mode,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Published per-area improvement ratios used as calibration targets when
/// printing comparison results; not asserted.
pub const REFERENCE_SPEEDUP_PER_AREA: f64 = 9.8;
pub const REFERENCE_ENERGY_EFF_PER_AREA: f64 = 2.2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityOutcome {
    pub heads_checked: usize,
    pub coordinates_checked: u64,
    pub mismatches: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub hybrid: CostReport,
    pub baseline: CostReport,
    pub achieved: Comparison,
    pub reference_speedup_per_area: f64,
    pub reference_energy_eff_per_area: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: String,
    pub value: usize,
    pub latency_s: f64,
    pub energy_j: f64,
    pub cycles: usize,
    pub hbm_bytes: u64,
    pub throughput_ops_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub metadata: ReportMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<SignalStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Vec<(u8, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPoint>>,
}

/// SHA-256 of the canonical config text; any edited value changes it.
pub fn config_hash(hw: &HardwareConfig) -> String {
    let digest = Sha256::digest(to_config_text(hw).as_bytes());
    format!("{digest:x}")
}

/// Parse, validate, and normalize a config file; returns the config and its
/// fully-resolved text (defaults filled in).
pub fn validate_config(path: &Path) -> Result<(HardwareConfig, String)> {
    let text = std::fs::read_to_string(path)?;
    let hw = parse_config_text(&text)?;
    Ok((hw.clone(), to_config_text(&hw)))
}

/// Reference restatement of the hybrid GEMM semantics used by fidelity
/// mode: per K-slice, exact if the partial exceeds the ADC range, ADC
/// quantized otherwise. Independent of the scheduled pipeline.
pub fn hybrid_reference(
    a: &QuantizedMatrix,
    b: &QuantizedMatrix,
    hw: &HardwareConfig,
) -> Result<Vec<f64>> {
    let ks = hw.k_slice_depth();
    let slices = partial_sums(a, b, ks)?;
    let n_slices = a.cols.div_ceil(ks);
    let fs = hw.adc.full_scale();
    let mut out = vec![0.0; a.rows * b.cols];
    for (idx, chunk) in slices.chunks(n_slices).enumerate() {
        for &p in chunk {
            if hw.comparator_enabled && (p as f64).abs() > fs {
                out[idx] += p as f64;
            } else {
                let (code, _) = adc_convert(p as f64, &hw.adc);
                out[idx] += code as f64 * hw.adc.lsb;
            }
        }
    }
    Ok(out)
}

/// Run the attention pipeline and cross-check every GEMM output coordinate
/// against `hybrid_reference`. Noise is forced off; the check is bit-exact.
pub fn fidelity_check(
    workload: &AttentionWorkload,
    hw: &HardwareConfig,
    seed: u64,
) -> Result<(FidelityOutcome, SignalStats)> {
    let mut cfg = hw.clone();
    cfg.dptc.noise_sigma = 0.0;
    let mut noise = NoiseSource::new(seed);
    let lut = crate::digital::SoftmaxLut::new();
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    let mut stats = SignalStats::default();
    for head in &workload.operands {
        let kt = head.k.transpose();
        let s = hybrid_gemm(&head.q, &kt, &cfg, &mut noise, ResultSink::OnChip)?;
        let reference = hybrid_reference(&head.q, &kt, &cfg)?;
        for (got, want) in s.units.iter().zip(&reference) {
            checked += 1;
            if got != want {
                mismatches += 1;
            }
        }
        stats.total_signals += s.stats.total_signals;
        stats.overres_signals += s.stats.overres_signals;
        stats.mau_tasks += s.stats.mau_tasks;
        stats.register_spills += s.stats.register_spills;

        let mut probs = RealMatrix::zeros(workload.seq_len, workload.seq_len);
        for r in 0..workload.seq_len {
            let row: Vec<f64> = (0..workload.seq_len).map(|c| s.get(r, c)).collect();
            let p = crate::digital::softmax_row_scaled(&row, s.unit_scale, workload.d_k, &lut)?;
            probs.values[r * workload.seq_len..(r + 1) * workload.seq_len].copy_from_slice(&p);
        }
        let p4 = quantize(
            &probs,
            &QuantSpec::new(cfg.operand_bits, ScalePolicy::PerTensorMax),
        )?;
        let o = hybrid_gemm(&p4, &head.v, &cfg, &mut noise, ResultSink::Hbm)?;
        let reference = hybrid_reference(&p4, &head.v, &cfg)?;
        for (got, want) in o.units.iter().zip(&reference) {
            checked += 1;
            if got != want {
                mismatches += 1;
            }
        }
        stats.total_signals += o.stats.total_signals;
        stats.overres_signals += o.stats.overres_signals;
        stats.mau_tasks += o.stats.mau_tasks;
        stats.register_spills += o.stats.register_spills;
    }
    Ok((
        FidelityOutcome {
            heads_checked: workload.operands.len(),
            coordinates_checked: checked,
            mismatches,
            pass: mismatches == 0,
        },
        stats,
    ))
}

/// Execute one experiment and write its artifacts (report.json, trace.csv,
/// histogram.csv as applicable) under the output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SimulationReport> {
    spec.hardware.validate()?;
    let workload = spec.workload.realize()?;
    std::fs::create_dir_all(&spec.out_dir)?;
    let metadata = ReportMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(&spec.hardware),
        seed: spec.seed,
        mode: format!("{:?}", spec.mode),
    };
    let mut report = SimulationReport {
        metadata,
        stats: None,
        fidelity: None,
        histogram: None,
        cost: None,
        comparison: None,
        sweep: None,
    };

    match &spec.mode {
        Mode::Fidelity => {
            let (outcome, stats) = fidelity_check(&workload, &spec.hardware, spec.seed)?;
            report.fidelity = Some(outcome);
            report.stats = Some(stats);
        }
        Mode::Histogram { bits } => {
            let ks = spec.hardware.k_slice_depth();
            let mut signals = Vec::new();
            for head in &workload.operands {
                let kt = head.k.transpose();
                signals.extend(partial_sums(&head.q, &kt, ks)?);
            }
            let hist = resolution_histogram(&signals, bits)?;
            let mut csv = String::from("bits,fraction_within_range\n");
            for (b, f) in &hist {
                csv.push_str(&format!("{b},{f}\n"));
            }
            std::fs::write(spec.out_dir.join("histogram.csv"), csv)?;
            report.histogram = Some(hist);
        }
        Mode::Cost => {
            let run = run_attention(&workload, &spec.hardware, spec.seed)?;
            let cost =
                CostReport::build(&spec.hardware, &run.trace, attention_useful_ops(&workload))?;
            std::fs::write(spec.out_dir.join("trace.csv"), run.trace.to_csv())?;
            std::fs::write(spec.out_dir.join("cost.csv"), cost.to_csv())?;
            report.stats = Some(run.stats);
            report.cost = Some(cost);
        }
        Mode::Compare => {
            let ops = attention_useful_ops(&workload);
            let hy_run = run_attention(&workload, &spec.hardware, spec.seed)?;
            let hy_report = CostReport::build(&spec.hardware, &hy_run.trace, ops)?;
            let base_cfg = derive_baseline(&spec.hardware);
            let base_run = run_attention(&workload, &base_cfg, spec.seed)?;
            let base_report = CostReport::build(&base_cfg, &base_run.trace, ops)?;
            let achieved = compare(&hy_report, &base_report)?;
            std::fs::write(spec.out_dir.join("trace.csv"), hy_run.trace.to_csv())?;
            std::fs::write(spec.out_dir.join("trace_baseline.csv"), base_run.trace.to_csv())?;
            report.stats = Some(hy_run.stats);
            report.comparison = Some(ComparisonReport {
                hybrid: hy_report,
                baseline: base_report,
                achieved,
                reference_speedup_per_area: REFERENCE_SPEEDUP_PER_AREA,
                reference_energy_eff_per_area: REFERENCE_ENERGY_EFF_PER_AREA,
            });
        }
        Mode::SweepTiles { tiles } => {
            let points = sweep_tiles(&workload, &spec.hardware, tiles, spec.seed)?;
            let mut csv = String::from("tiles,latency_s,energy_j,hbm_bytes,throughput_ops_s\n");
            let sweep: Vec<SweepPoint> = points
                .into_iter()
                .map(|(tiles, r, hbm)| {
                    csv.push_str(&format!(
                        "{tiles},{},{},{hbm},{}\n",
                        r.latency_s, r.energy_j, r.throughput_ops_s
                    ));
                    SweepPoint {
                        axis: "tiles".into(),
                        value: tiles,
                        latency_s: r.latency_s,
                        energy_j: r.energy_j,
                        cycles: 0,
                        hbm_bytes: hbm,
                        throughput_ops_s: r.throughput_ops_s,
                    }
                })
                .collect();
            std::fs::write(spec.out_dir.join("sweep.csv"), csv)?;
            report.sweep = Some(sweep);
        }
        Mode::SweepSeqLen { seq_lens } => {
            let mut csv =
                String::from("seq_len,cycles,latency_s,energy_j,hbm_bytes,throughput_ops_s\n");
            let mut sweep = Vec::with_capacity(seq_lens.len());
            for &seq in seq_lens {
                let mut wspec = spec.workload.clone();
                wspec.params.seq_len = seq;
                wspec.files = None;
                let w = wspec.realize()?;
                let run = run_attention(&w, &spec.hardware, spec.seed)?;
                let r = CostReport::build(&spec.hardware, &run.trace, attention_useful_ops(&w))?;
                let cycles = run.trace.records.len();
                let hbm = run.trace.total_hbm_bytes();
                csv.push_str(&format!(
                    "{seq},{cycles},{},{},{hbm},{}\n",
                    r.latency_s, r.energy_j, r.throughput_ops_s
                ));
                sweep.push(SweepPoint {
                    axis: "seq_len".into(),
                    value: seq,
                    latency_s: r.latency_s,
                    energy_j: r.energy_j,
                    cycles,
                    hbm_bytes: hbm,
                    throughput_ops_s: r.throughput_ops_s,
                });
            }
            std::fs::write(spec.out_dir.join("sweep.csv"), csv)?;
            report.sweep = Some(sweep);
        }
    }

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| SimError::Format(format!("report serialization: {e}")))?;
    std::fs::write(spec.out_dir.join("report.json"), json)?;
    Ok(report)
}
