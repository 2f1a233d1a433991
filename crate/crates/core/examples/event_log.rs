//! Attach a custom event sink and summarise ToR residence per class,
//! alongside writing the standard events.csv.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use tiermem::engine::Request;
use tiermem::metrics::percentiles;
use tiermem::runner::{run_scenario, RunOptions, EVENTS_FILE};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let mut sc = Scenario::preset("fig4_corun")?;
    sc.duration_cycles = 100_000;
    let residences: Arc<Mutex<BTreeMap<&'static str, Vec<u64>>>> = Default::default();
    let sink_side = Arc::clone(&residences);
    let sink = move |r: &Request| {
        if let Some(t) = r.residence() {
            sink_side.lock().unwrap().entry(r.class.as_str()).or_default().push(t);
        }
    };
    let out = std::env::temp_dir().join("tiermem-event-log");
    run_scenario(
        &sc,
        RunOptions { out_dir: Some(out.clone()), event_log: true, sink: Some(Box::new(sink)), ..Default::default() },
    )?;
    for (class, v) in residences.lock().unwrap().iter() {
        let p = percentiles(v, &[50.0, 99.0])?;
        println!("{class:<6} {:>8} requests  p50 {:>5}  p99 {:>5}", v.len(), p[0], p[1]);
    }
    println!("per-request log: {}", out.join(EVENTS_FILE).display());
    Ok(())
}
