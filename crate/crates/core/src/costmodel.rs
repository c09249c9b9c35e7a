//! Analytical area/power/latency/energy model and the derived
//! single-high-resolution-ADC baseline used for per-area comparisons.

use serde::{Deserialize, Serialize};

use crate::dataflow::{AttentionWorkload, CycleTrace};
use crate::digital::MauSpec;
use crate::error::{Result, SimError};
use crate::photonic::{AdcSpec, DptcSpec, PdacSpec};

/// Area/power record for one component group, as configured (per tile for
/// die components, absolute for shared ones).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentCost {
    pub area_mm2: f64,
    pub power_mw: f64,
    pub count: usize,
}

impl ComponentCost {
    pub fn new(area_mm2: f64, power_mw: f64, count: usize) -> Self {
        Self {
            area_mm2,
            power_mw,
            count,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0)
    }
}

/// The full hardware parameter set: per-component costs, functional specs,
/// timing, and system-level knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub tiles: usize,
    // shared by all tiles
    pub shared_pdac: ComponentCost,
    pub shared_sram: ComponentCost,
    pub shared_sram_capacity_bytes: usize,
    // photonic die, per tile
    pub local_pdac: ComponentCost,
    pub adc_cost: ComponentCost,
    pub dptc_cost: ComponentCost,
    pub local_sram: ComponentCost,
    pub local_sram_capacity_bytes: usize,
    pub coord_register: ComponentCost,
    pub coord_register_capacity_bytes: usize,
    pub accumulator: ComponentCost,
    pub comparator: ComponentCost,
    // digital die, per tile
    pub mau_cost: ComponentCost,
    pub digital_register: ComponentCost,
    pub digital_register_capacity_bytes: usize,
    pub softmax_cost: ComponentCost,
    // functional specs
    pub adc: AdcSpec,
    pub pdac: PdacSpec,
    pub dptc: DptcSpec,
    pub mau: MauSpec,
    pub operand_bits: u8,
    // timing and system
    pub digital_cycle_time_s: f64,
    pub hbm_bandwidth_bytes_per_s: f64,
    pub idle_power_fraction: f64,
    pub comparator_enabled: bool,
    pub row_group_parallelism: bool,
    pub serialize_flagged_transfers: bool,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            tiles: 32,
            shared_pdac: ComponentCost::new(0.0016, 8.0, 1),
            shared_sram: ComponentCost::new(3.68, 1230.0, 1),
            shared_sram_capacity_bytes: 2 * 1024 * 1024,
            local_pdac: ComponentCost::new(0.0748, 520.0, 64),
            adc_cost: ComponentCost::new(0.0057, 29.6, 32),
            dptc_cost: ComponentCost::new(0.246, 624.0, 1),
            local_sram: ComponentCost::new(0.06, 19.0, 1),
            local_sram_capacity_bytes: 32 * 1024,
            coord_register: ComponentCost::new(0.015, 5.23, 1),
            coord_register_capacity_bytes: 8 * 1024,
            accumulator: ComponentCost::new(0.0014, 0.039, 32),
            comparator: ComponentCost::new(0.00031, 0.019, 32),
            mau_cost: ComponentCost::new(0.014, 8.2, 1),
            digital_register: ComponentCost::new(0.002, 0.63, 1),
            digital_register_capacity_bytes: 1024,
            softmax_cost: ComponentCost::new(0.0072, 1.134, 1),
            adc: AdcSpec::default(),
            pdac: PdacSpec::default(),
            dptc: DptcSpec::default(),
            mau: MauSpec::default(),
            operand_bits: 4,
            digital_cycle_time_s: 1e-9,
            hbm_bandwidth_bytes_per_s: 1e12,
            idle_power_fraction: 0.1,
            comparator_enabled: true,
            row_group_parallelism: true,
            serialize_flagged_transfers: false,
        }
    }
}

impl HardwareConfig {
    /// Reduction depth consumed per array operation: one full-width operand
    /// slice per op.
    pub fn k_slice_depth(&self) -> usize {
        self.dptc.n_h
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiles < 1 {
            return Err(SimError::Config {
                location: "tiles".into(),
                message: "must be >= 1".into(),
            });
        }
        let costs = [
            ("shared_pdac", &self.shared_pdac),
            ("shared_sram", &self.shared_sram),
            ("local_pdac", &self.local_pdac),
            ("adc", &self.adc_cost),
            ("dptc", &self.dptc_cost),
            ("local_sram", &self.local_sram),
            ("coord_register", &self.coord_register),
            ("accumulator", &self.accumulator),
            ("comparator", &self.comparator),
            ("mau", &self.mau_cost),
            ("digital_register", &self.digital_register),
            ("softmax", &self.softmax_cost),
        ];
        for (name, c) in costs {
            if c.area_mm2 < 0.0 || c.power_mw < 0.0 {
                return Err(SimError::Config {
                    location: name.into(),
                    message: format!("negative area/power ({}, {})", c.area_mm2, c.power_mw),
                });
            }
        }
        if self.adc.lsb <= 0.0 {
            return Err(SimError::Config {
                location: "adc.lsb".into(),
                message: "must be positive".into(),
            });
        }
        if self.hbm_bandwidth_bytes_per_s <= 0.0 {
            return Err(SimError::Config {
                location: "hbm_bandwidth_bytes_per_s".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// (name, cost, instances) across the whole chip: shared components
    /// once, die components once per tile.
    pub fn component_table(&self) -> Vec<(&'static str, ComponentCost, usize)> {
        vec![
            ("shared_pdac", self.shared_pdac, 1),
            ("shared_sram", self.shared_sram, 1),
            ("local_pdac", self.local_pdac, self.tiles),
            ("adc", self.adc_cost, self.tiles),
            ("dptc", self.dptc_cost, self.tiles),
            ("local_sram", self.local_sram, self.tiles),
            ("coord_register", self.coord_register, self.tiles),
            ("accumulator", self.accumulator, self.tiles),
            ("comparator", self.comparator, self.tiles),
            ("mau", self.mau_cost, self.tiles),
            ("digital_register", self.digital_register, self.tiles),
            ("softmax", self.softmax_cost, self.tiles),
        ]
    }
}

/// Aggregated total with a per-component breakdown; fractions sum to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub components: Vec<ComponentShare>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentShare {
    pub name: String,
    pub value: f64,
    pub fraction: f64,
}

impl CostBreakdown {
    pub fn fraction_of(&self, name: &str) -> f64 {
        self.components
            .iter()
            .filter(|c| c.name == name)
            .map(|c| c.fraction)
            .sum()
    }

    /// Combined share of several components.
    pub fn fraction_of_any(&self, names: &[&str]) -> f64 {
        names.iter().map(|n| self.fraction_of(n)).sum()
    }
}

fn aggregate(hw: &HardwareConfig, pick: impl Fn(&ComponentCost) -> f64) -> CostBreakdown {
    let mut components = Vec::new();
    let mut total = 0.0;
    for (name, cost, instances) in hw.component_table() {
        let value = pick(&cost) * instances as f64;
        total += value;
        components.push(ComponentShare {
            name: name.to_string(),
            value,
            fraction: 0.0,
        });
    }
    for c in &mut components {
        c.fraction = if total > 0.0 { c.value / total } else { 0.0 };
    }
    CostBreakdown { total, components }
}

/// Total chip area in mm^2 with per-component shares.
pub fn aggregate_area(hw: &HardwareConfig) -> CostBreakdown {
    aggregate(hw, |c| c.area_mm2)
}

/// Total chip power in mW with per-component shares.
pub fn aggregate_power(hw: &HardwareConfig) -> CostBreakdown {
    aggregate(hw, |c| c.power_mw)
}

/// Latency and energy recomputed from a cycle trace. Latency takes the
/// pipelined maximum over the four stages in each cycle window; energy
/// charges each component its active time at full power and the rest at the
/// idle fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEnergy {
    pub latency_s: f64,
    pub energy_j: f64,
}

pub fn latency_energy(trace: &CycleTrace, hw: &HardwareConfig) -> Result<LatencyEnergy> {
    let max_slots = (hw.dptc.n_v * hw.dptc.n_h).div_ceil(hw.adc.count_per_array.max(1)) as u64;
    let mut latency = 0.0f64;
    let mut total_ops = 0u64;
    let mut total_conversions = 0u64;
    let mut total_digital_cycles = 0u64;
    let mut busy_cycles = 0u64;
    for rec in &trace.records {
        if rec.adc_slots > max_slots {
            return Err(SimError::TraceMismatch(format!(
                "cycle {}: {} ADC slots exceed the {} available",
                rec.cycle, rec.adc_slots, max_slots
            )));
        }
        if rec.photonic_ops as usize > hw.tiles {
            return Err(SimError::TraceMismatch(format!(
                "cycle {}: {} photonic ops on {} tiles",
                rec.cycle, rec.photonic_ops, hw.tiles
            )));
        }
        let photonic = if rec.photonic_ops > 0 {
            hw.pdac.modulation_time_s + hw.dptc.op_time_s
        } else {
            0.0
        };
        let adc = rec.adc_slots as f64 * hw.adc.conversion_time_s;
        let digital = rec.digital_cycles as f64 * hw.digital_cycle_time_s;
        let hbm = rec.hbm_bytes as f64 / hw.hbm_bandwidth_bytes_per_s;
        let window = if hw.serialize_flagged_transfers {
            let transfer = rec.photonic_digital_bytes as f64 / hw.hbm_bandwidth_bytes_per_s;
            photonic.max(adc).max(hbm) + transfer + digital
        } else {
            photonic.max(adc).max(digital).max(hbm)
        };
        latency += window;
        total_ops += rec.photonic_ops;
        total_conversions += rec.conversions;
        total_digital_cycles += rec.digital_cycles;
        if rec.photonic_ops > 0 {
            busy_cycles += 1;
        }
    }

    // per-component aggregate busy time across all instances
    let op_busy = total_ops as f64 * hw.dptc.op_time_s;
    let adc_unit_busy = total_conversions as f64 * hw.adc.conversion_time_s
        / hw.adc.count_per_array.max(1) as f64;
    let digital_busy = total_digital_cycles as f64 * hw.digital_cycle_time_s;
    let broadcast_busy = busy_cycles as f64 * hw.pdac.modulation_time_s;

    let mut energy_mw_s = 0.0f64;
    for (name, cost, instances) in hw.component_table() {
        let capacity = latency * instances as f64;
        let busy = match name {
            "dptc" => op_busy,
            "local_pdac" => total_ops as f64 * hw.pdac.modulation_time_s,
            "shared_pdac" => broadcast_busy,
            "adc" => adc_unit_busy,
            "mau" | "softmax" => digital_busy,
            // memories, registers, accumulator, comparator serve every cycle
            _ => capacity,
        };
        let busy = busy.min(capacity);
        let idle = capacity - busy;
        energy_mw_s += cost.power_mw * (busy + idle * hw.idle_power_fraction);
    }
    Ok(LatencyEnergy {
        latency_s: latency,
        energy_j: energy_mw_s * 1e-3,
    })
}

/// Full metrics for one run on one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub total_area_mm2: f64,
    pub total_power_w: f64,
    pub area_breakdown: CostBreakdown,
    pub power_breakdown: CostBreakdown,
    pub latency_s: f64,
    pub energy_j: f64,
    /// Useful MAC operations in the workload.
    pub useful_ops: u64,
    pub throughput_ops_s: f64,
    pub perf_per_area: f64,
    pub energy_eff_per_area: f64,
    /// Total ADC conversion slots consumed over the run (trace sum).
    pub adc_slots: u64,
}

impl CostReport {
    pub fn build(hw: &HardwareConfig, trace: &CycleTrace, useful_ops: u64) -> Result<Self> {
        let area = aggregate_area(hw);
        let power = aggregate_power(hw);
        let le = latency_energy(trace, hw)?;
        let throughput = if le.latency_s > 0.0 {
            useful_ops as f64 / le.latency_s
        } else {
            0.0
        };
        let perf_per_area = if area.total > 0.0 {
            throughput / area.total
        } else {
            0.0
        };
        let ops_per_j = if le.energy_j > 0.0 {
            useful_ops as f64 / le.energy_j
        } else {
            0.0
        };
        let energy_eff_per_area = if area.total > 0.0 {
            ops_per_j / area.total
        } else {
            0.0
        };
        Ok(Self {
            total_area_mm2: area.total,
            total_power_w: power.total * 1e-3,
            area_breakdown: area,
            power_breakdown: power,
            latency_s: le.latency_s,
            energy_j: le.energy_j,
            useful_ops,
            throughput_ops_s: throughput,
            perf_per_area,
            energy_eff_per_area,
            adc_slots: trace.records.iter().map(|r| r.adc_slots).sum(),
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\narea_mm2,{}\npower_w,{}\nlatency_s,{}\nenergy_j,{}\nthroughput_ops_s,{}\nperf_per_area,{}\nenergy_eff_per_area,{}\n",
            self.total_area_mm2,
            self.total_power_w,
            self.latency_s,
            self.energy_j,
            self.throughput_ops_s,
            self.perf_per_area,
            self.energy_eff_per_area
        )
    }
}

/// MAC count for one attention workload: both GEMMs, all heads and batches.
pub fn attention_useful_ops(w: &AttentionWorkload) -> u64 {
    let per_head = 2 * w.seq_len as u64 * w.seq_len as u64 * w.d_k as u64;
    per_head * (w.heads * w.batch) as u64
}

/// Derive the baseline configuration: one 8-bit ADC per array (area and
/// power scale by 2x per extra bit), no comparator, no coordinate register,
/// no digital GEMM fallback; the digital softmax unit stays.
pub fn derive_baseline(hw: &HardwareConfig) -> HardwareConfig {
    let mut base = hw.clone();
    let unit_area = hw.adc_cost.area_mm2 / hw.adc_cost.count.max(1) as f64;
    let unit_power = hw.adc_cost.power_mw / hw.adc_cost.count.max(1) as f64;
    let extra_bits = 8u32.saturating_sub(hw.adc.bits as u32);
    let factor = (1u64 << extra_bits) as f64;
    base.adc_cost = ComponentCost::new(unit_area * factor, unit_power * factor, 1);
    base.adc = AdcSpec {
        bits: 8,
        lsb: hw.adc.lsb,
        count_per_array: 1,
        conversion_time_s: hw.adc.conversion_time_s,
    };
    base.comparator = ComponentCost::zero();
    base.coord_register = ComponentCost::zero();
    base.mau_cost = ComponentCost::zero();
    base.digital_register = ComponentCost::zero();
    base.comparator_enabled = false;
    base
}

/// Per-area performance and energy-efficiency ratios between two reports of
/// the same workload.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Comparison {
    /// Baseline latency over hybrid latency.
    pub speedup: f64,
    /// Baseline energy over hybrid energy.
    pub energy_efficiency_gain: f64,
    pub speedup_per_area: f64,
    pub energy_eff_per_area: f64,
    /// Baseline conversion slots over hybrid conversion slots.
    pub conversion_slot_ratio: f64,
}

pub fn compare(hybrid: &CostReport, baseline: &CostReport) -> Result<Comparison> {
    if baseline.perf_per_area == 0.0
        || baseline.energy_eff_per_area == 0.0
        || hybrid.latency_s == 0.0
        || hybrid.energy_j == 0.0
        || hybrid.adc_slots == 0
    {
        return Err(SimError::ZeroBaseline);
    }
    Ok(Comparison {
        speedup: baseline.latency_s / hybrid.latency_s,
        energy_efficiency_gain: baseline.energy_j / hybrid.energy_j,
        speedup_per_area: hybrid.perf_per_area / baseline.perf_per_area,
        energy_eff_per_area: hybrid.energy_eff_per_area / baseline.energy_eff_per_area,
        conversion_slot_ratio: baseline.adc_slots as f64 / hybrid.adc_slots as f64,
    })
}

/// One report per tile count, same workload.
pub fn sweep_tiles(
    workload: &AttentionWorkload,
    hw: &HardwareConfig,
    tile_counts: &[usize],
    seed: u64,
) -> Result<Vec<(usize, CostReport, u64)>> {
    if tile_counts.is_empty() {
        return Err(SimError::EmptyInput("tile sweep axis".into()));
    }
    let ops = attention_useful_ops(workload);
    let mut out = Vec::with_capacity(tile_counts.len());
    for &tiles in tile_counts {
        let mut cfg = hw.clone();
        cfg.tiles = tiles;
        let run = crate::dataflow::run_attention(workload, &cfg, seed)?;
        let report = CostReport::build(&cfg, &run.trace, ops)?;
        let hbm = run.trace.total_hbm_bytes();
        out.push((tiles, report, hbm));
    }
    Ok(out)
}

/// One report per workload on a fixed configuration.
pub fn sweep_workloads(
    workloads: &[AttentionWorkload],
    hw: &HardwareConfig,
    seed: u64,
) -> Result<Vec<CostReport>> {
    if workloads.is_empty() {
        return Err(SimError::EmptyInput("workload sweep axis".into()));
    }
    workloads
        .iter()
        .map(|w| {
            let run = crate::dataflow::run_attention(w, hw, seed)?;
            CostReport::build(hw, &run.trace, attention_useful_ops(w))
        })
        .collect()
}

/// Line-oriented `key = value` text form with one section per component
/// group. Diff-friendly; unknown sections and keys are rejected with the
/// offending line.
pub fn to_config_text(hw: &HardwareConfig) -> String {
    let mut s = String::new();
    s.push_str("[system]\n");
    s.push_str(&format!("tiles = {}\n", hw.tiles));
    s.push_str(&format!(
        "hbm_bandwidth_bytes_per_s = {}\n",
        hw.hbm_bandwidth_bytes_per_s
    ));
    s.push_str(&format!("idle_power_fraction = {}\n", hw.idle_power_fraction));
    s.push_str(&format!("operand_bits = {}\n", hw.operand_bits));
    s.push_str(&format!("comparator_enabled = {}\n", hw.comparator_enabled));
    s.push_str(&format!(
        "row_group_parallelism = {}\n",
        hw.row_group_parallelism
    ));
    s.push_str(&format!(
        "serialize_flagged_transfers = {}\n",
        hw.serialize_flagged_transfers
    ));
    s.push_str("\n[timing]\n");
    s.push_str(&format!("photonic_op_time_s = {}\n", hw.dptc.op_time_s));
    s.push_str(&format!(
        "adc_conversion_time_s = {}\n",
        hw.adc.conversion_time_s
    ));
    s.push_str(&format!("digital_cycle_time_s = {}\n", hw.digital_cycle_time_s));
    s.push_str(&format!(
        "pdac_modulation_time_s = {}\n",
        hw.pdac.modulation_time_s
    ));
    let cost = |s: &mut String, c: &ComponentCost| {
        s.push_str(&format!("area_mm2 = {}\n", c.area_mm2));
        s.push_str(&format!("power_mw = {}\n", c.power_mw));
        s.push_str(&format!("count = {}\n", c.count));
    };
    s.push_str("\n[shared_pdac]\n");
    cost(&mut s, &hw.shared_pdac);
    s.push_str(&format!("resolution_bits = {}\n", hw.pdac.bits));
    s.push_str("\n[shared_sram]\n");
    cost(&mut s, &hw.shared_sram);
    s.push_str(&format!("capacity_bytes = {}\n", hw.shared_sram_capacity_bytes));
    s.push_str("\n[local_pdac]\n");
    cost(&mut s, &hw.local_pdac);
    s.push_str("\n[adc]\n");
    cost(&mut s, &hw.adc_cost);
    s.push_str(&format!("resolution_bits = {}\n", hw.adc.bits));
    s.push_str(&format!("lsb = {}\n", hw.adc.lsb));
    s.push_str(&format!("count_per_array = {}\n", hw.adc.count_per_array));
    s.push_str("\n[dptc]\n");
    cost(&mut s, &hw.dptc_cost);
    s.push_str(&format!("rows = {}\n", hw.dptc.n_v));
    s.push_str(&format!("cols = {}\n", hw.dptc.n_h));
    s.push_str(&format!("noise_sigma = {}\n", hw.dptc.noise_sigma));
    s.push_str("\n[local_sram]\n");
    cost(&mut s, &hw.local_sram);
    s.push_str(&format!("capacity_bytes = {}\n", hw.local_sram_capacity_bytes));
    s.push_str("\n[coord_register]\n");
    cost(&mut s, &hw.coord_register);
    s.push_str(&format!(
        "capacity_bytes = {}\n",
        hw.coord_register_capacity_bytes
    ));
    s.push_str("\n[accumulator]\n");
    cost(&mut s, &hw.accumulator);
    s.push_str("\n[comparator]\n");
    cost(&mut s, &hw.comparator);
    s.push_str("\n[mau]\n");
    cost(&mut s, &hw.mau_cost);
    s.push_str(&format!("macs_per_cycle = {}\n", hw.mau.macs_per_cycle));
    s.push_str("\n[digital_register]\n");
    cost(&mut s, &hw.digital_register);
    s.push_str(&format!(
        "capacity_bytes = {}\n",
        hw.digital_register_capacity_bytes
    ));
    s.push_str("\n[softmax]\n");
    cost(&mut s, &hw.softmax_cost);
    s
}

/// Parse the text form, starting from defaults so omitted keys keep their
/// shipped values.
pub fn parse_config_text(text: &str) -> Result<HardwareConfig> {
    let mut hw = HardwareConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |key: &str| format!("line {}, [{}] {}", lineno + 1, section, key);
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            const SECTIONS: &[&str] = &[
                "system",
                "timing",
                "shared_pdac",
                "shared_sram",
                "local_pdac",
                "adc",
                "dptc",
                "local_sram",
                "coord_register",
                "accumulator",
                "comparator",
                "mau",
                "digital_register",
                "softmax",
            ];
            if !SECTIONS.contains(&section.as_str()) {
                return Err(SimError::Config {
                    location: format!("line {}", lineno + 1),
                    message: format!("unknown section [{section}]"),
                });
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| SimError::Config {
            location: format!("line {}", lineno + 1),
            message: format!("expected key = value, found {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let f = || -> Result<f64> {
            value.parse().map_err(|e| SimError::Config {
                location: at(key),
                message: format!("bad number {value:?}: {e}"),
            })
        };
        let u = || -> Result<usize> {
            value.parse().map_err(|e| SimError::Config {
                location: at(key),
                message: format!("bad count {value:?}: {e}"),
            })
        };
        let b = || -> Result<bool> {
            value.parse().map_err(|e| SimError::Config {
                location: at(key),
                message: format!("bad flag {value:?}: {e}"),
            })
        };
        let set_cost = |c: &mut ComponentCost, key: &str| -> Result<bool> {
            match key {
                "area_mm2" => {
                    c.area_mm2 = value.parse().map_err(|e| SimError::Config {
                        location: at(key),
                        message: format!("bad number: {e}"),
                    })?;
                    Ok(true)
                }
                "power_mw" => {
                    c.power_mw = value.parse().map_err(|e| SimError::Config {
                        location: at(key),
                        message: format!("bad number: {e}"),
                    })?;
                    Ok(true)
                }
                "count" => {
                    c.count = value.parse().map_err(|e| SimError::Config {
                        location: at(key),
                        message: format!("bad count: {e}"),
                    })?;
                    Ok(true)
                }
                _ => Ok(false),
            }
        };
        let known = match section.as_str() {
            "system" => match key {
                "tiles" => {
                    hw.tiles = u()?;
                    true
                }
                "hbm_bandwidth_bytes_per_s" => {
                    hw.hbm_bandwidth_bytes_per_s = f()?;
                    true
                }
                "idle_power_fraction" => {
                    hw.idle_power_fraction = f()?;
                    true
                }
                "operand_bits" => {
                    hw.operand_bits = u()? as u8;
                    true
                }
                "comparator_enabled" => {
                    hw.comparator_enabled = b()?;
                    true
                }
                "row_group_parallelism" => {
                    hw.row_group_parallelism = b()?;
                    true
                }
                "serialize_flagged_transfers" => {
                    hw.serialize_flagged_transfers = b()?;
                    true
                }
                _ => false,
            },
            "timing" => match key {
                "photonic_op_time_s" => {
                    hw.dptc.op_time_s = f()?;
                    true
                }
                "adc_conversion_time_s" => {
                    hw.adc.conversion_time_s = f()?;
                    true
                }
                "digital_cycle_time_s" => {
                    hw.digital_cycle_time_s = f()?;
                    hw.mau.cycle_time_s = hw.digital_cycle_time_s;
                    true
                }
                "pdac_modulation_time_s" => {
                    hw.pdac.modulation_time_s = f()?;
                    true
                }
                _ => false,
            },
            "shared_pdac" => {
                set_cost(&mut hw.shared_pdac, key)?
                    || match key {
                        "resolution_bits" => {
                            hw.pdac.bits = u()? as u8;
                            true
                        }
                        _ => false,
                    }
            }
            "shared_sram" => {
                set_cost(&mut hw.shared_sram, key)?
                    || match key {
                        "capacity_bytes" => {
                            hw.shared_sram_capacity_bytes = u()?;
                            true
                        }
                        _ => false,
                    }
            }
            "local_pdac" => set_cost(&mut hw.local_pdac, key)?,
            "adc" => {
                set_cost(&mut hw.adc_cost, key)?
                    || match key {
                        "resolution_bits" => {
                            hw.adc.bits = u()? as u8;
                            true
                        }
                        "lsb" => {
                            hw.adc.lsb = f()?;
                            true
                        }
                        "count_per_array" => {
                            hw.adc.count_per_array = u()?;
                            true
                        }
                        _ => false,
                    }
            }
            "dptc" => {
                set_cost(&mut hw.dptc_cost, key)?
                    || match key {
                        "rows" => {
                            hw.dptc.n_v = u()?;
                            true
                        }
                        "cols" => {
                            hw.dptc.n_h = u()?;
                            true
                        }
                        "noise_sigma" => {
                            hw.dptc.noise_sigma = f()?;
                            true
                        }
                        _ => false,
                    }
            }
            "local_sram" => {
                set_cost(&mut hw.local_sram, key)?
                    || match key {
                        "capacity_bytes" => {
                            hw.local_sram_capacity_bytes = u()?;
                            true
                        }
                        _ => false,
                    }
            }
            "coord_register" => {
                set_cost(&mut hw.coord_register, key)?
                    || match key {
                        "capacity_bytes" => {
                            hw.coord_register_capacity_bytes = u()?;
                            true
                        }
                        _ => false,
                    }
            }
            "accumulator" => set_cost(&mut hw.accumulator, key)?,
            "comparator" => set_cost(&mut hw.comparator, key)?,
            "mau" => {
                set_cost(&mut hw.mau_cost, key)?
                    || match key {
                        "macs_per_cycle" => {
                            hw.mau.macs_per_cycle = u()?;
                            true
                        }
                        _ => false,
                    }
            }
            "digital_register" => {
                set_cost(&mut hw.digital_register, key)?
                    || match key {
                        "capacity_bytes" => {
                            hw.digital_register_capacity_bytes = u()?;
                            true
                        }
                        _ => false,
                    }
            }
            "softmax" => set_cost(&mut hw.softmax_cost, key)?,
            "" => {
                return Err(SimError::Config {
                    location: format!("line {}", lineno + 1),
                    message: "key outside any section".into(),
                })
            }
            _ => unreachable!("section validated above"),
        };
        if !known {
            return Err(SimError::Config {
                location: format!("line {}", lineno + 1),
                message: format!("unknown key {key:?} in section [{section}]"),
            });
        }
    }
    hw.validate()?;
    Ok(hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{hybrid_gemm, ResultSink};
    use crate::photonic::NoiseSource;
    use crate::qtensor::QuantizedMatrix;

    #[test]
    fn default_area_matches_published_total() {
        let hw = HardwareConfig::default();
        let area = aggregate_area(&hw);
        let rel = (area.total - 17.38).abs() / 17.38;
        assert!(rel < 0.005, "area {} off by {rel}", area.total);
    }

    #[test]
    fn default_power_matches_published_total() {
        let hw = HardwareConfig::default();
        let power = aggregate_power(&hw);
        let rel = (power.total - 39_900.0).abs() / 39_900.0;
        assert!(rel < 0.01, "power {} mW off by {rel}", power.total);
    }

    #[test]
    fn single_component_config() {
        let mut hw = HardwareConfig::default();
        hw.tiles = 1;
        for (_, cost, _) in hw.component_table() {
            let _ = cost;
        }
        hw.shared_pdac = ComponentCost::zero();
        hw.shared_sram = ComponentCost::zero();
        hw.local_pdac = ComponentCost::zero();
        hw.adc_cost = ComponentCost::zero();
        hw.dptc_cost = ComponentCost::zero();
        hw.local_sram = ComponentCost::new(0.06, 0.0, 1);
        hw.coord_register = ComponentCost::zero();
        hw.accumulator = ComponentCost::zero();
        hw.comparator = ComponentCost::zero();
        hw.mau_cost = ComponentCost::zero();
        hw.digital_register = ComponentCost::zero();
        hw.softmax_cost = ComponentCost::zero();
        assert_eq!(aggregate_area(&hw).total, 0.06);
        assert_eq!(aggregate_power(&hw).total, 0.0);
    }

    #[test]
    fn area_shares_match_published_breakdown() {
        let hw = HardwareConfig::default();
        let area = aggregate_area(&hw);
        let dptc = area.fraction_of("dptc") * 100.0;
        assert!((dptc - 45.1).abs() <= 1.0, "dptc share {dptc}%");
        let memory = area.fraction_of_any(&[
            "shared_sram",
            "local_sram",
            "coord_register",
            "digital_register",
        ]) * 100.0;
        assert!((memory - 34.7).abs() <= 1.0, "memory share {memory}%");
        let pdac = area.fraction_of_any(&["shared_pdac", "local_pdac"]) * 100.0;
        assert!((pdac - 14.2).abs() <= 1.0, "pdac share {pdac}%");
    }

    #[test]
    fn power_shares_match_published_breakdown() {
        let hw = HardwareConfig::default();
        let power = aggregate_power(&hw);
        let dptc = power.fraction_of("dptc") * 100.0;
        assert!((dptc - 49.5).abs() <= 1.0, "dptc share {dptc}%");
        let pdac = power.fraction_of_any(&["shared_pdac", "local_pdac"]) * 100.0;
        assert!((pdac - 41.6).abs() <= 1.0, "pdac share {pdac}%");
    }

    #[test]
    fn breakdown_fractions_sum_to_one() {
        let hw = HardwareConfig::default();
        for b in [aggregate_area(&hw), aggregate_power(&hw)] {
            let sum: f64 = b.components.iter().map(|c| c.fraction).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_trace_is_zero_cost() {
        let hw = HardwareConfig::default();
        let le = latency_energy(&CycleTrace::default(), &hw).unwrap();
        assert_eq!(le.latency_s, 0.0);
        assert_eq!(le.energy_j, 0.0);
    }

    #[test]
    fn conversion_slots_per_full_array_op() {
        let hw = HardwareConfig::default();
        let a = QuantizedMatrix::zeros(64, 64, 4);
        let b = QuantizedMatrix::zeros(64, 64, 4);
        let mut noise = NoiseSource::new(0);
        let r = hybrid_gemm(&a, &b, &hw, &mut noise, ResultSink::Hbm).unwrap();
        assert_eq!(r.trace.records.len(), 1);
        assert_eq!(r.trace.records[0].conversions, 4096);
        assert_eq!(r.trace.records[0].adc_slots, 128);
    }

    #[test]
    fn trace_mismatch_rejected() {
        let hw = HardwareConfig::default();
        let mut trace = CycleTrace::default();
        trace.records.push(crate::dataflow::CycleRecord {
            cycle: 0,
            photonic_ops: 1,
            conversions: 4096,
            adc_slots: 4096, // impossible with 32 ADCs
            overres: 0,
            digital_tasks: 0,
            digital_cycles: 0,
            hbm_bytes: 0,
            shared_local_bytes: 0,
            photonic_digital_bytes: 0,
        });
        assert!(latency_energy(&trace, &hw).is_err());
    }

    #[test]
    fn baseline_adc_arithmetic() {
        let hw = HardwareConfig::default();
        let base = derive_baseline(&hw);
        let expect = 0.0057 / 32.0 * 16.0;
        assert!((base.adc_cost.area_mm2 - expect).abs() < 1e-12);
        assert_eq!(base.adc_cost.count, 1);
        assert_eq!(base.adc.bits, 8);
        assert_eq!(base.adc.count_per_array, 1);
        assert!(!base.comparator_enabled);
        // removed digital fallback, softmax kept
        assert_eq!(base.mau_cost.area_mm2, 0.0);
        assert_eq!(base.coord_register.area_mm2, 0.0);
        assert_eq!(base.comparator.area_mm2, 0.0);
        assert_eq!(base.softmax_cost, hw.softmax_cost);
        // all non-ADC photonic parameters preserved
        assert_eq!(base.dptc_cost, hw.dptc_cost);
        assert_eq!(base.local_pdac, hw.local_pdac);
        assert_eq!(base.dptc, hw.dptc);
    }

    #[test]
    fn baseline_conversion_slots_per_op() {
        let base = derive_baseline(&HardwareConfig::default());
        let a = QuantizedMatrix::zeros(64, 64, 4);
        let b = QuantizedMatrix::zeros(64, 64, 4);
        let mut noise = NoiseSource::new(0);
        let r = hybrid_gemm(&a, &b, &base, &mut noise, ResultSink::Hbm).unwrap();
        assert_eq!(r.trace.records[0].adc_slots, 4096);
    }

    #[test]
    fn identical_configs_compare_to_unity() {
        let hw = HardwareConfig::default();
        let a = QuantizedMatrix::zeros(64, 64, 4);
        let b = QuantizedMatrix::zeros(64, 64, 4);
        let mut noise = NoiseSource::new(0);
        let r = hybrid_gemm(&a, &b, &hw, &mut noise, ResultSink::Hbm).unwrap();
        let report = CostReport::build(&hw, &r.trace, 64 * 64 * 64).unwrap();
        let c = compare(&report, &report).unwrap();
        assert!((c.speedup_per_area - 1.0).abs() < 1e-12);
        assert!((c.energy_eff_per_area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_area_halves_per_area_metrics() {
        let hw = HardwareConfig::default();
        let a = QuantizedMatrix::zeros(64, 64, 4);
        let b = QuantizedMatrix::zeros(64, 64, 4);
        let mut noise = NoiseSource::new(0);
        let r = hybrid_gemm(&a, &b, &hw, &mut noise, ResultSink::Hbm).unwrap();
        let r1 = CostReport::build(&hw, &r.trace, 64 * 64 * 64).unwrap();
        let mut hw2 = hw.clone();
        for c in [
            &mut hw2.shared_pdac,
            &mut hw2.shared_sram,
            &mut hw2.local_pdac,
            &mut hw2.adc_cost,
            &mut hw2.dptc_cost,
            &mut hw2.local_sram,
            &mut hw2.coord_register,
            &mut hw2.accumulator,
            &mut hw2.comparator,
            &mut hw2.mau_cost,
            &mut hw2.digital_register,
            &mut hw2.softmax_cost,
        ] {
            c.area_mm2 *= 2.0;
        }
        let r2 = CostReport::build(&hw2, &r.trace, 64 * 64 * 64).unwrap();
        assert!((r2.perf_per_area - r1.perf_per_area / 2.0).abs() / r1.perf_per_area < 1e-12);
        assert!(
            (r2.energy_eff_per_area - r1.energy_eff_per_area / 2.0).abs() / r1.energy_eff_per_area
                < 1e-12
        );
    }

    #[test]
    fn config_text_round_trip() {
        let hw = HardwareConfig::default();
        let text = to_config_text(&hw);
        let back = parse_config_text(&text).unwrap();
        assert_eq!(hw, back);
    }

    #[test]
    fn config_unknown_key_rejected() {
        let text = "[adc]\nfoo = 3\n";
        match parse_config_text(text) {
            Err(SimError::Config { message, .. }) => assert!(message.contains("foo")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_unknown_section_rejected() {
        assert!(parse_config_text("[warp_drive]\narea_mm2 = 1\n").is_err());
    }

    #[test]
    fn config_negative_value_rejected() {
        let text = "[adc]\narea_mm2 = -1\n";
        assert!(parse_config_text(text).is_err());
    }

    #[test]
    fn config_omitted_keys_keep_defaults() {
        let hw = parse_config_text("[system]\ntiles = 8\n").unwrap();
        assert_eq!(hw.tiles, 8);
        assert_eq!(hw.adc.lsb, 1.0);
        assert_eq!(hw.adc_cost, HardwareConfig::default().adc_cost);
    }

    #[test]
    fn latency_replay_from_csv_is_bit_identical() {
        let hw = HardwareConfig::default();
        let a = crate::qtensor::QuantizedMatrix::new(
            128,
            128,
            (0..128 * 128).map(|i| ((i % 15) as i8) - 7).collect(),
            4,
            1.0,
        );
        let mut noise = NoiseSource::new(0);
        let r = hybrid_gemm(&a, &a, &hw, &mut noise, ResultSink::Hbm).unwrap();
        let direct = latency_energy(&r.trace, &hw).unwrap();
        let replayed =
            latency_energy(&CycleTrace::from_csv(&r.trace.to_csv()).unwrap(), &hw).unwrap();
        assert_eq!(direct, replayed);
    }
}
