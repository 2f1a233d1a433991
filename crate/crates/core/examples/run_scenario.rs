//! Run a bundled scenario (or a scenario file) and print the per-window
//! tier bandwidth.
//!
//! cargo run --release --example run_scenario -- fig4_corun

use tiermem::platform::Tier;
use tiermem::runner::{run_scenario, RunOptions};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "fig4_corun".into());
    let sc = Scenario::resolve(&name)?;
    let r = run_scenario(&sc, RunOptions::default())?;
    println!("{}: {}", sc.name, sc.description);
    println!("{:>6} {:>10} {:>10}", "window", "DDR GB/s", "CXL GB/s");
    for w in &r.metrics.windows {
        println!(
            "{:>6} {:>10.2} {:>10.2}",
            w.index,
            r.metrics.bandwidth(w, Tier::Ddr) / 1e9,
            r.metrics.bandwidth(w, Tier::Cxl) / 1e9
        );
    }
    for w in &r.summary.workloads {
        println!("{:<12} {:>8.2} GB/s", w.name, w.bandwidth_gbps);
    }
    Ok(())
}
