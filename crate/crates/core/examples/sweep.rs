//! Run every bundled scenario in parallel, each into its own directory.

use tiermem::runner::{sweep, RunOptions};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let out = std::env::temp_dir().join("tiermem-sweep");
    let mut runs = Vec::new();
    for name in Scenario::preset_names() {
        let sc = Scenario::preset(name)?;
        let dir = out.join(name);
        runs.push((sc, RunOptions { out_dir: Some(dir), ..Default::default() }));
    }
    let jobs = std::thread::available_parallelism().map_or(2, |n| n.get());
    for r in sweep(runs, jobs) {
        let r = r?;
        let t = &r.summary.totals;
        println!("{:<20} DDR {:>7.2} GB/s  CXL {:>7.2} GB/s", r.summary.scenario, t.ddr_bandwidth_gbps, t.cxl_bandwidth_gbps);
    }
    println!("outputs under {}", out.display());
    Ok(())
}
