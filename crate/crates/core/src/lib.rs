//! Deterministic functional and analytical simulator for a hybrid
//! photonic–digital attention accelerator.
//!
//! The accelerator computes quantized attention with photonic tensor cores
//! feeding low-resolution ADCs; output signals that exceed the ADC range are
//! flagged by an analog comparator and recomputed exactly on a small digital
//! die, so the hybrid result matches full-precision integer arithmetic on
//! over-range signals while paying low-resolution conversion cost on the
//! (common) in-range ones.
//!
//! Module map:
//! - [`qtensor`] — symmetric low-bit quantization and exact integer GEMM.
//! - [`photonic`] — crossbar tile ops, ADCs, comparator, coordinate register.
//! - [`digital`] — exact recompute unit, LUT softmax, accumulator.
//! - [`dataflow`] — tiling, scheduling, the hybrid GEMM, the attention
//!   pipeline, and the per-cycle event trace.
//! - [`costmodel`] — area/power/latency/energy accounting and baseline
//!   comparison.
//! - [`harness`] — workload generation, experiments, and reports.

pub mod costmodel;
pub mod dataflow;
pub mod digital;
pub mod error;
pub mod harness;
pub mod photonic;
pub mod qtensor;

pub use error::{Result, SimError};
