//! Pointer-chase hop latency on each tier, alone and next to a CXL flood,
//! with the fraction of hops under a few thresholds.

use tiermem::engine::{SimOptions, Simulation};
use tiermem::platform::PlatformSpec;
use tiermem::workloads::{tail_histogram, AccessKind, Placement, WorkloadSpec};

fn hops(placement: Placement, flood: bool) -> tiermem::Result<Vec<u64>> {
    let mut ws = vec![WorkloadSpec::pointer_chase("chase", 1 << 20, placement)];
    if flood {
        ws.push(WorkloadSpec::bw_stream("flood", 16, Placement::CxlOnly, AccessKind::Load));
    }
    let mut sim = Simulation::new(PlatformSpec::platform_a(), ws, SimOptions::default())?;
    sim.run_until(200_000);
    Ok(sim.workloads()[0].latencies.clone())
}

fn main() -> tiermem::Result<()> {
    let thresholds = [150, 300, 1000, 3000];
    for (label, placement, flood) in [
        ("DDR", Placement::DdrOnly, false),
        ("CXL", Placement::CxlOnly, false),
        ("CXL + flood", Placement::CxlOnly, true),
    ] {
        let h = hops(placement, flood)?;
        let mean = h.iter().sum::<u64>() as f64 / h.len() as f64;
        let below = tail_histogram(&h, &thresholds)?;
        println!("{label:<12} {:>6} hops, mean {mean:>7.1}, below {thresholds:?}: {below:.3?}", h.len());
    }
    Ok(())
}
