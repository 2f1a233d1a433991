//! Sweep the LLC split between a DDR and a CXL stream whose working sets
//! both fit. Giving DDR more cache can make it slower.

use std::collections::BTreeMap;

use tiermem::runner::{run_scenario, RunOptions};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let base = Scenario::preset("fig6_llc_partition")?;
    for ddr_share in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let mut sc = base.clone();
        sc.llc.partitions =
            BTreeMap::from([("ddr_stream".into(), ddr_share), ("cxl_stream".into(), 1.0 - ddr_share)]);
        let r = run_scenario(&sc, RunOptions::default())?;
        let bw = |n: &str| r.summary.workloads.iter().find(|w| w.name == n).map_or(0.0, |w| w.bandwidth_gbps);
        println!(
            "DDR share {ddr_share:.2}: ddr_stream {:>6.2} GB/s, cxl_stream {:>6.2} GB/s",
            bw("ddr_stream"),
            bw("cxl_stream")
        );
    }
    Ok(())
}
