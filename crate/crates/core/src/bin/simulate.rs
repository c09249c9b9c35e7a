//! Thin command-line front end over the simulator library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybrid_attn_sim::costmodel::HardwareConfig;
use hybrid_attn_sim::harness::{
    run_experiment, validate_config, ExperimentSpec, Mode, SimulationReport, WorkloadSpec,
    REFERENCE_ENERGY_EFF_PER_AREA, REFERENCE_SPEEDUP_PER_AREA,
};

#[derive(Parser)]
#[command(
    name = "simulate",
    about = "Hybrid photonic-digital attention accelerator simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Hardware configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Workload description file; a default synthetic workload when omitted.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// RNG seed for workload synthesis and photonic noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for report.json and CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the photonic tile count from the config.
    #[arg(long)]
    tiles: Option<usize>,
    /// Gaussian noise sigma injected on analog partial sums.
    #[arg(long)]
    noise: Option<f64>,
    /// Model flagged photonic-to-digital transfers as serialized after
    /// conversion instead of overlapped.
    #[arg(long)]
    serialize_transfers: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-check the scheduled hybrid pipeline against a direct
    /// per-coordinate reference (bit-exact, noise off).
    Fidelity(Common),
    /// Fraction of analog partial sums within ADC range per resolution.
    Histogram {
        #[command(flatten)]
        common: Common,
        /// ADC resolutions to evaluate, e.g. 2,4,8.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        bits: Vec<u8>,
    },
    /// Area, power, latency, energy, and traffic for one workload.
    Cost(Common),
    /// Run the workload on the hybrid design and on the derived
    /// single high-resolution-ADC baseline, and report ratios.
    Compare(Common),
    /// Latency/energy/traffic across tile counts (or sequence lengths).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Tile counts to sweep, e.g. 8,16,32,64.
        #[arg(long = "tiles-list", value_delimiter = ',', conflicts_with = "seq_lens")]
        tiles_list: Option<Vec<usize>>,
        /// Sequence lengths to sweep instead of tile counts.
        #[arg(long, value_delimiter = ',')]
        seq_lens: Option<Vec<usize>>,
    },
    /// Parse a configuration file and echo its fully-resolved form.
    Validate {
        /// Hardware configuration file to check.
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_hardware(common: &Common) -> Result<HardwareConfig, hybrid_attn_sim::SimError> {
    let mut hw = match &common.config {
        Some(path) => validate_config(path)?.0,
        None => HardwareConfig::default(),
    };
    if let Some(tiles) = common.tiles {
        hw.tiles = tiles;
    }
    if let Some(sigma) = common.noise {
        hw.dptc.noise_sigma = sigma;
    }
    if common.serialize_transfers {
        hw.serialize_flagged_transfers = true;
    }
    hw.validate()?;
    Ok(hw)
}

fn load_workload(common: &Common) -> Result<WorkloadSpec, hybrid_attn_sim::SimError> {
    match &common.workload {
        Some(path) => WorkloadSpec::load(path),
        None => Ok(WorkloadSpec::default()),
    }
}

fn run(common: Common, mode: Mode, name: &str) -> Result<SimulationReport, hybrid_attn_sim::SimError> {
    let hardware = load_hardware(&common)?;
    let mut workload = load_workload(&common)?;
    workload.seed = common.seed;
    let spec = ExperimentSpec {
        name: name.to_string(),
        workload,
        hardware,
        mode,
        seed: common.seed,
        out_dir: common.out.clone(),
    };
    run_experiment(&spec)
}

fn print_report(report: &SimulationReport, out: &std::path::Path) {
    if let Some(f) = &report.fidelity {
        println!(
            "fidelity: {} ({} coordinates across {} heads, {} mismatches)",
            if f.pass { "PASS" } else { "FAIL" },
            f.coordinates_checked,
            f.heads_checked,
            f.mismatches
        );
    }
    if let Some(h) = &report.histogram {
        println!("bits  fraction_within_range");
        for (b, frac) in h {
            println!("{b:>4}  {frac:.6}");
        }
    }
    if let Some(c) = &report.cost {
        println!("area        {:.4} mm^2", c.total_area_mm2);
        println!("power       {:.4} W", c.total_power_w);
        println!("latency     {:.6e} s", c.latency_s);
        println!("energy      {:.6e} J", c.energy_j);
        println!("throughput  {:.4e} ops/s", c.throughput_ops_s);
    }
    if let Some(cmp) = &report.comparison {
        let a = &cmp.achieved;
        println!("speedup                    {:.3}x", a.speedup);
        println!("energy-efficiency gain     {:.3}x", a.energy_efficiency_gain);
        println!(
            "speedup per area           {:.3}x (reference design point: {:.1}x)",
            a.speedup_per_area, REFERENCE_SPEEDUP_PER_AREA
        );
        println!(
            "energy efficiency per area {:.3}x (reference design point: {:.1}x)",
            a.energy_eff_per_area, REFERENCE_ENERGY_EFF_PER_AREA
        );
        println!("conversion-slot ratio      {:.1}x", a.conversion_slot_ratio);
    }
    if let Some(points) = &report.sweep {
        println!("{:>8}  {:>12}  {:>12}  {:>12}", "value", "latency_s", "energy_j", "hbm_bytes");
        for p in points {
            println!(
                "{:>8}  {:>12.4e}  {:>12.4e}  {:>12}",
                p.value, p.latency_s, p.energy_j, p.hbm_bytes
            );
        }
    }
    println!("artifacts written to {}", out.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fidelity(common) => {
            let out = common.out.clone();
            run(common, Mode::Fidelity, "fidelity").map(|r| (r, out))
        }
        Command::Histogram { common, bits } => {
            let out = common.out.clone();
            run(common, Mode::Histogram { bits }, "histogram").map(|r| (r, out))
        }
        Command::Cost(common) => {
            let out = common.out.clone();
            run(common, Mode::Cost, "cost").map(|r| (r, out))
        }
        Command::Compare(common) => {
            let out = common.out.clone();
            run(common, Mode::Compare, "compare").map(|r| (r, out))
        }
        Command::Sweep {
            common,
            tiles_list,
            seq_lens,
        } => {
            let out = common.out.clone();
            let mode = match (tiles_list, seq_lens) {
                (_, Some(seq_lens)) => Mode::SweepSeqLen { seq_lens },
                (Some(tiles), None) => Mode::SweepTiles { tiles },
                (None, None) => Mode::SweepTiles {
                    tiles: vec![8, 16, 32, 64],
                },
            };
            run(common, mode, "sweep").map(|r| (r, out))
        }
        Command::Validate { config } => match validate_config(&config) {
            Ok((_, resolved)) => {
                print!("{resolved}");
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok((report, out)) => {
            print_report(&report, &out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
