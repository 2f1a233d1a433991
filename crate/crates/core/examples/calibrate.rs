//! Measure the controller's reference latencies and the tier peaks of a
//! platform preset.

use tiermem::platform::PlatformSpec;
use tiermem::runner::calibrate;

fn main() -> tiermem::Result<()> {
    for name in PlatformSpec::preset_names() {
        let p = PlatformSpec::preset(name).expect("listed preset");
        let r = calibrate(&p, 0)?;
        println!("{name}");
        println!("  t_ddr_ref            {:>8.1} cycles", r.t_ddr_ref);
        println!("  unloaded DDR / CXL   {:>8.1} / {:.1} cycles", r.unloaded_ddr_latency, r.unloaded_cxl_latency);
        println!("  loaded CXL residence {:>8.1} cycles", r.loaded_cxl_latency);
        println!("  peak DDR / CXL       {:>8.2} / {:.2} GB/s", r.ddr_peak_gbps, r.cxl_peak_gbps);
        println!("  analytic DDR / CXL   {:>8.2} / {:.2} GB/s", p.peak_bandwidth(tiermem::platform::Tier::Ddr) / 1e9, p.peak_bandwidth(tiermem::platform::Tier::Cxl) / 1e9);
    }
    Ok(())
}
