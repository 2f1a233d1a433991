//! One stream, several DDR:CXL page interleave ratios: how the tiers share
//! the traffic and what the stream achieves.

use tiermem::platform::Tier;
use tiermem::runner::{run_scenario, RunOptions};
use tiermem::scenario::Scenario;
use tiermem::workloads::Placement;

fn main() -> tiermem::Result<()> {
    let base = Scenario::preset("calib_cxl")?;
    for (ddr, cxl) in [(1, 0), (4, 1), (2, 1), (1, 1), (1, 2), (0, 1)] {
        let mut sc = base.clone();
        sc.duration_cycles = 100_000;
        sc.workloads[0].placement = Placement::Interleave { ddr, cxl };
        sc.workloads[0].issue_interval = 1;
        let r = run_scenario(&sc, RunOptions::default())?;
        let n = r.metrics.windows.len();
        println!(
            "{ddr}:{cxl}  DDR {:>6.2} GB/s  CXL {:>6.2} GB/s  stream {:>6.2} GB/s",
            r.tier_bandwidth(Tier::Ddr, 1, n) / 1e9,
            r.tier_bandwidth(Tier::Cxl, 1, n) / 1e9,
            r.summary.workloads[0].bandwidth_gbps
        );
    }
    Ok(())
}
