//! Aggregate the default hardware configuration into chip-level area and
//! power totals and per-component shares.

use hybrid_attn_sim::costmodel::{aggregate_area, aggregate_power, HardwareConfig};

fn main() {
    let hw = HardwareConfig::default();
    let area = aggregate_area(&hw);
    let power = aggregate_power(&hw);
    println!("total area  {:.3} mm^2", area.total);
    println!("total power {:.3} W", power.total * 1e-3);
    println!();
    println!("{:<18} {:>10} {:>8}   {:>12} {:>8}", "component", "area mm^2", "share", "power mW", "share");
    for (a, p) in area.components.iter().zip(&power.components) {
        println!(
            "{:<18} {:>10.4} {:>7.2}%   {:>12.2} {:>7.2}%",
            a.name,
            a.value,
            100.0 * a.value / area.total,
            p.value,
            100.0 * p.value / power.total
        );
    }
}
