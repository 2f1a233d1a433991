//! Build platforms in code: vary the DDR device count and watch the
//! isolated DDR peak scale with it.

use tiermem::engine::Restriction;
use tiermem::platform::{PlatformSpec, Tier};
use tiermem::runner::probe;
use tiermem::workloads::{AccessKind, Placement, WorkloadSpec};

fn main() -> tiermem::Result<()> {
    for devices in [1, 2, 4, 8] {
        let mut p = PlatformSpec::platform_a();
        p.name = format!("a_{devices}ddr");
        p.ddr_devices.truncate(devices);
        p.validate()?;
        let w = WorkloadSpec::bw_stream("peak", 32, Placement::DdrOnly, AccessKind::Load);
        let win = probe(&p, vec![w], Restriction::none(), 20_000, 100_000, 0)?;
        let gbps = win.tier_bytes(Tier::Ddr, p.cacheline_bytes) as f64 * p.clock_hz / win.cycles() as f64 / 1e9;
        println!("{devices} DDR devices: {gbps:7.2} GB/s (analytic {:.2})", p.peak_bandwidth(Tier::Ddr) / 1e9);
    }
    Ok(())
}
