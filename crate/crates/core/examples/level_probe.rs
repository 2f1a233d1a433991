//! Pin a CXL stream to each restriction level and report throughput and
//! ToR residence against the latency target.

use tiermem::runner::{level_probe, sustainable_cxl_gbps};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let sc = Scenario::preset("fig4_corun")?;
    let points = level_probe(&sc, "cxl_stream")?;
    println!("{:<13} {:>9} {:>12} {:>8}  backlog-free", "level", "CXL GB/s", "residence", "target");
    for p in &points {
        println!("{:<13} {:>9.2} {:>12.1} {:>8.1}  {}", p.level, p.cxl_gbps, p.cxl_latency, p.target, p.backlog_free);
    }
    match sustainable_cxl_gbps(&points) {
        Some(g) => println!("sustainable without backlog: {g:.2} GB/s"),
        None => println!("no level is backlog-free"),
    }
    Ok(())
}
