//! Phase-switching co-run with the controller off, on, and in rate-cap-only
//! mode. Prints DDR/CXL bandwidth and the level chosen each window.

use tiermem::controller::ControllerMode;
use tiermem::platform::Tier;
use tiermem::runner::{run_scenario, RunOptions};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let sc = Scenario::preset("fig9_miku_phases")?;
    for mode in [ControllerMode::Off, ControllerMode::On, ControllerMode::Mba] {
        let r = run_scenario(&sc, RunOptions { controller: Some(mode), ..Default::default() })?;
        println!("controller {}", mode.as_str());
        for (w, d) in r.metrics.windows.iter().zip(&r.decisions) {
            println!(
                "  w{:<3} DDR {:>6.2}  CXL {:>6.2}  next {:<12} cap {}",
                w.index,
                r.metrics.bandwidth(w, Tier::Ddr) / 1e9,
                r.metrics.bandwidth(w, Tier::Cxl) / 1e9,
                d.level,
                d.rate_cap.map_or("-".into(), |c| format!("{c:.4}"))
            );
        }
    }
    Ok(())
}
