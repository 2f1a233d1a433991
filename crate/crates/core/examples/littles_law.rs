//! Compare the counter-derived mean ToR residence (occupancy / inserts)
//! with the mean measured from individual requests.

use std::sync::{Arc, Mutex};

use tiermem::engine::{Request, TorClass};
use tiermem::runner::{run_scenario, RunOptions};
use tiermem::scenario::Scenario;

fn main() -> tiermem::Result<()> {
    let sc = Scenario::preset("fig4_corun")?;
    let seen: Arc<Mutex<Vec<(u64, u64, TorClass)>>> = Default::default();
    let s = Arc::clone(&seen);
    let sink = move |r: &Request| {
        if let (Some(a), Some(b)) = (r.t_tor, r.t_complete) {
            s.lock().unwrap().push((a, b, r.class));
        }
    };
    let r = run_scenario(&sc, RunOptions { sink: Some(Box::new(sink)), ..Default::default() })?;
    let reqs = seen.lock().unwrap();
    for w in &r.metrics.windows {
        let inside: Vec<_> = reqs.iter().filter(|(a, b, c)| *c == TorClass::Cxl && *a >= w.t_start && *b <= w.t_end).collect();
        let per_request = inside.iter().map(|(a, b, _)| (b - a) as f64).sum::<f64>() / inside.len().max(1) as f64;
        println!(
            "w{:<3} CXL counters {:>8.1}  requests completed inside window {:>8.1}",
            w.index,
            w.class_latency(TorClass::Cxl).unwrap_or(f64::NAN),
            per_request
        );
    }
    Ok(())
}
