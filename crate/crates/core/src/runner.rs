//! Scenario execution: wires platform, workloads, LLC and controller into a
//! simulation, steps it window by window and writes the run outputs.
//!
//! Also hosts the calibration probes that turn a platform description into
//! the controller's reference latencies.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{
    sample_window, target_cxl_latency, AutoOr, Controller, ControllerMode, Decision, Level, WindowInput,
};
use crate::engine::{EventSink, LlcOptions, Restriction, SimOptions, Simulation, Snapshot, Tee, TorClass};
use crate::error::{Error, Result};
use crate::metrics::{
    bandwidth, mean, percentiles, round6, write_controller_csv, write_metrics_csv, EventLogWriter,
    MetricsStore, Summary, TierTotals, WindowRecord, WorkloadSummary, SCHEMA_VERSION,
};
use crate::platform::{PlatformSpec, Tier};
use crate::scenario::Scenario;
use crate::workloads::{AccessKind, Placement, WorkloadSpec};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONTROLLER_FILE: &str = "controller.csv";
pub const EVENTS_FILE: &str = "events.csv";

/// Per-invocation overrides; everything else comes from the scenario.
#[derive(Default)]
pub struct RunOptions {
    /// Write the output files here when set.
    pub out_dir: Option<PathBuf>,
    /// Also write the per-request event log (needs `out_dir`).
    pub event_log: bool,
    pub controller: Option<ControllerMode>,
    pub seed: Option<u64>,
    /// Skips the calibration probe when the scenario asks for `auto`.
    pub t_ddr_ref: Option<f64>,
    pub check_invariants: Option<bool>,
    /// Extra sink receiving every request that leaves the ToR.
    pub sink: Option<Box<dyn EventSink>>,
}

pub struct RunReport {
    /// The scenario as run, overrides applied.
    pub scenario: Scenario,
    pub metrics: MetricsStore,
    pub decisions: Vec<Decision>,
    pub summary: Summary,
    /// Per-workload request latencies of latency-oriented patterns.
    pub latencies: Vec<Vec<u64>>,
    pub violations: Vec<String>,
    pub read_threshold: f64,
    /// `None` when the controller was off and no reference was given.
    pub t_ddr_ref: Option<f64>,
    pub final_snapshot: Snapshot,
}

impl RunReport {
    /// Mean tier bandwidth in bytes per second over windows `[from, to)`.
    pub fn tier_bandwidth(&self, tier: Tier, from: usize, to: usize) -> f64 {
        self.metrics.mean_bandwidth(tier, from, to.min(self.metrics.windows.len()))
    }
}

pub fn default_read_threshold(platform: &PlatformSpec) -> f64 {
    3.0 * platform.unloaded_read_latency(Tier::Cxl) as f64
}

fn sim_options(sc: &Scenario, seed: u64, check: bool) -> Result<SimOptions> {
    let llc = if sc.llc.enabled {
        let partitions = sc
            .llc
            .partitions
            .iter()
            .map(|(name, &f)| {
                sc.workload_index(name)
                    .map(|i| (i, f))
                    .ok_or_else(|| Error::config(format!("llc.partitions.{name}"), "no workload with this name"))
            })
            .collect::<Result<_>>()?;
        Some(LlcOptions {
            capacity_bytes: sc.llc.capacity_bytes,
            partitions,
        })
    } else {
        None
    };
    Ok(SimOptions {
        seed,
        jitter: sc.engine.jitter,
        check_invariants: check,
        llc,
        sampling_rate_n: sc.controller.sampling_rate_n,
    })
}

pub fn run_scenario(scenario: &Scenario, mut opts: RunOptions) -> Result<RunReport> {
    let mut sc = scenario.clone();
    if let Some(m) = opts.controller {
        sc.controller.mode = m;
    }
    if let Some(s) = opts.seed {
        sc.seed = s;
    }
    if let Some(c) = opts.check_invariants {
        sc.engine.check_invariants = c;
    }
    sc.validate()?;
    let platform = sc.platform_spec()?;

    let read_threshold = match sc.controller.read_threshold {
        AutoOr::Value(v) => v,
        AutoOr::Auto => default_read_threshold(&platform),
    };
    let t_ddr_ref = match (sc.controller.t_ddr_ref, opts.t_ddr_ref) {
        (AutoOr::Value(v), _) => Some(v),
        (AutoOr::Auto, Some(v)) => Some(v),
        (AutoOr::Auto, None) if sc.controller.mode != ControllerMode::Off => {
            Some(measure_t_ddr_ref(&platform, sc.seed)?)
        }
        (AutoOr::Auto, None) => None,
    };

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut sim = Simulation::new(
        platform.clone(),
        sc.workloads.clone(),
        sim_options(&sc, sc.seed, sc.engine.check_invariants)?,
    )?;
    let mut sinks: Vec<Box<dyn EventSink>> = Vec::new();
    if opts.event_log {
        let dir = opts
            .out_dir
            .as_ref()
            .ok_or_else(|| Error::config("event_log", "an output directory is required"))?;
        sinks.push(Box::new(EventLogWriter::create(&dir.join(EVENTS_FILE))?));
    }
    if let Some(s) = opts.sink.take() {
        sinks.push(s);
    }
    if !sinks.is_empty() {
        sim.set_sink(Box::new(Tee(sinks)));
    }

    let names = sc.workloads.iter().map(|w| w.name.clone()).collect();
    let mut metrics = MetricsStore::new(platform.cacheline_bytes, platform.clock_hz, names);
    let mut controller = Controller::new(sc.controller.clone(), read_threshold, t_ddr_ref.unwrap_or(0.0));

    let duration = sc.duration_cycles;
    let rep = sc.report_window();
    let ctl = sc.controller.sample_period_cycles;
    let mut rep_snap = sim.snapshot();
    let mut ctl_snap = rep_snap.clone();
    let (mut next_rep, mut next_ctl) = (rep, ctl);
    while sim.now() < duration {
        sim.run_until(next_rep.min(next_ctl).min(duration));
        let now = sim.now();
        let snap = sim.snapshot();
        if now == next_ctl {
            let stats = sample_window(&ctl_snap, &snap);
            let samples = sim.drain_samples();
            let core_bytes: Vec<u64> = snap
                .core_completed_bytes
                .iter()
                .zip(&ctl_snap.core_completed_bytes)
                .map(|(b, a)| b - a)
                .collect();
            let restriction = controller.on_window(&WindowInput {
                stats,
                samples: &samples,
                core_bytes: &core_bytes,
                clock_hz: platform.clock_hz,
                line: platform.cacheline_bytes,
            });
            sim.set_restriction(restriction);
            ctl_snap = snap.clone();
            next_ctl += ctl;
        }
        if now == next_rep || now == duration {
            metrics.record(&rep_snap, &snap);
            rep_snap = snap;
            next_rep = now + rep;
        }
    }
    sim.finish_sink()?;

    let final_snapshot = sim.snapshot();
    let latencies: Vec<Vec<u64>> = sim.workloads().iter().map(|w| w.latencies.clone()).collect();
    let summary = summarize(&sc, &metrics, &final_snapshot, &latencies);
    let decisions = controller.decisions().to_vec();
    if let Some(dir) = &opts.out_dir {
        write_metrics_csv(&metrics, &dir.join(METRICS_FILE))?;
        write_controller_csv(&decisions, &dir.join(CONTROLLER_FILE))?;
        summary.write(&dir.join(SUMMARY_FILE))?;
    }
    Ok(RunReport {
        violations: sim.violations().to_vec(),
        scenario: sc,
        metrics,
        decisions,
        summary,
        latencies,
        read_threshold,
        t_ddr_ref,
        final_snapshot,
    })
}

fn summarize(sc: &Scenario, metrics: &MetricsStore, last: &Snapshot, latencies: &[Vec<u64>]) -> Summary {
    let cycles = metrics.total_cycles();
    let (ddr, cxl) = (metrics.total_bytes(Tier::Ddr), metrics.total_bytes(Tier::Cxl));
    let bw = |bytes| round6(bandwidth(bytes, cycles, metrics.clock_hz) / 1e9);
    let workloads = sc
        .workloads
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let requests: u64 = metrics.windows.iter().map(|r| r.workload_requests[i]).sum();
            let lat = &latencies[i];
            let pct = percentiles(lat, &[50.0, 99.0]).ok();
            WorkloadSummary {
                name: w.name.clone(),
                requests,
                bandwidth_gbps: bw(requests * metrics.line),
                latency_mean: mean(lat).map(round6),
                latency_p50: pct.as_ref().map(|p| p[0]),
                latency_p99: pct.as_ref().map(|p| p[1]),
            }
        })
        .collect();
    Summary {
        schema_version: SCHEMA_VERSION,
        scenario: sc.name.clone(),
        config_hash: sc.config_hash(),
        seed: sc.seed,
        duration_cycles: sc.duration_cycles,
        windows: metrics.windows.len(),
        controller: sc.controller.mode.as_str().into(),
        totals: TierTotals {
            ddr_bytes: ddr,
            cxl_bytes: cxl,
            ddr_bandwidth_gbps: bw(ddr),
            cxl_bandwidth_gbps: bw(cxl),
            requests_completed: last.completed,
        },
        workloads,
    }
}

/// Run independent scenarios on up to `jobs` threads. Each run gets its own
/// simulation; results come back in input order.
pub fn sweep(runs: Vec<(Scenario, RunOptions)>, jobs: usize) -> Vec<Result<RunReport>> {
    let jobs = jobs.max(1);
    let mut slots: Vec<Option<Result<RunReport>>> = (0..runs.len()).map(|_| None).collect();
    let mut queue: Vec<(usize, Scenario, RunOptions)> =
        runs.into_iter().enumerate().map(|(i, (s, o))| (i, s, o)).collect();
    queue.reverse();
    let queue = std::sync::Mutex::new(queue);
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let Some((i, sc, o)) = queue.lock().unwrap().pop() else { break };
                let r = run_scenario(&sc, o);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every run finished")).collect()
}

// ---------------------------------------------------------------- probes

const PROBE_WARMUP: u64 = 20_000;
const PROBE_MEASURE: u64 = 100_000;

/// Run `workloads` with a fixed restriction and return the window after warmup.
pub fn probe(
    platform: &PlatformSpec,
    workloads: Vec<WorkloadSpec>,
    restriction: Restriction,
    warmup: u64,
    measure: u64,
    seed: u64,
) -> Result<WindowRecord> {
    let mut sim = Simulation::new(platform.clone(), workloads, SimOptions { seed, ..Default::default() })?;
    sim.set_restriction(restriction);
    sim.run_until(warmup);
    let a = sim.snapshot();
    sim.run_until(warmup + measure);
    Ok(WindowRecord::from_snapshots(0, &a, &sim.snapshot()))
}

fn stream(platform: &PlatformSpec, name: &str, tier: Tier, threads: u32, mlp: u32) -> WorkloadSpec {
    let placement = match tier {
        Tier::Ddr => Placement::DdrOnly,
        Tier::Cxl => Placement::CxlOnly,
    };
    let mut w = WorkloadSpec::bw_stream(name, threads.min(platform.cores_per_socket), placement, AccessKind::Load);
    w.mlp_per_thread = mlp;
    w
}

/// Mean DDR ToR residence with the DDR devices just saturated: 16 unpaced
/// load streams whose combined MLP equals the socket's DDR slot count.
pub fn measure_t_ddr_ref(platform: &PlatformSpec, seed: u64) -> Result<f64> {
    let threads = 16.min(platform.cores_per_socket);
    let slots: u32 = platform.ddr_devices.iter().map(|d| d.parallelism).sum();
    let w = stream(platform, "t_ddr_probe", Tier::Ddr, threads, slots.div_ceil(threads));
    let win = probe(platform, vec![w], Restriction::none(), PROBE_WARMUP, PROBE_MEASURE, seed)?;
    win.class_latency(TorClass::Ddr)
}

fn chase_latency(platform: &PlatformSpec, tier: Tier, seed: u64) -> Result<f64> {
    let placement = match tier {
        Tier::Ddr => Placement::DdrOnly,
        Tier::Cxl => Placement::CxlOnly,
    };
    let w = WorkloadSpec::pointer_chase("chase_probe", 1 << 20, placement);
    let mut sim = Simulation::new(platform.clone(), vec![w], SimOptions { seed, ..Default::default() })?;
    sim.run_until(PROBE_MEASURE);
    mean(&sim.workloads()[0].latencies).ok_or(Error::NoMeasurement("chase probe completed nothing"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub platform: String,
    /// DDR ToR residence at saturation, cycles.
    pub t_ddr_ref: f64,
    pub unloaded_ddr_latency: f64,
    pub unloaded_cxl_latency: f64,
    /// CXL ToR residence under an unpaced CXL-only load, cycles.
    pub loaded_cxl_latency: f64,
    pub ddr_peak_gbps: f64,
    pub cxl_peak_gbps: f64,
    pub suggested_read_threshold: f64,
}

/// DDR-only and CXL-only probes, loaded and unloaded.
pub fn calibrate(platform: &PlatformSpec, seed: u64) -> Result<CalibrationReport> {
    platform.validate()?;
    let t_ddr_ref = measure_t_ddr_ref(platform, seed)?;
    let unloaded_ddr = chase_latency(platform, Tier::Ddr, seed)?;
    let unloaded_cxl = chase_latency(platform, Tier::Cxl, seed)?;
    let saturate = |tier| {
        let w = stream(platform, "peak_probe", tier, 16, 48);
        probe(platform, vec![w], Restriction::none(), PROBE_WARMUP, PROBE_MEASURE, seed)
    };
    let ddr = saturate(Tier::Ddr)?;
    let cxl = saturate(Tier::Cxl)?;
    let line = platform.cacheline_bytes;
    let gbps = |w: &WindowRecord, t| bandwidth(w.tier_bytes(t, line), w.cycles(), platform.clock_hz) / 1e9;
    Ok(CalibrationReport {
        platform: platform.name.clone(),
        t_ddr_ref: round6(t_ddr_ref),
        unloaded_ddr_latency: round6(unloaded_ddr),
        unloaded_cxl_latency: round6(unloaded_cxl),
        loaded_cxl_latency: round6(cxl.class_latency(TorClass::Cxl)?),
        ddr_peak_gbps: round6(gbps(&ddr, Tier::Ddr)),
        cxl_peak_gbps: round6(gbps(&cxl, Tier::Cxl)),
        suggested_read_threshold: 3.0 * unloaded_cxl,
    })
}

/// Steady state of one workload confined to a fixed restriction level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub level: String,
    pub cxl_gbps: f64,
    pub cxl_latency: f64,
    pub target: f64,
    pub backlog_free: bool,
}

/// Run workload `name` of `sc` alone at every restriction level. The
/// backlog-free sustainable rate is the best CXL bandwidth among the levels
/// whose CXL ToR residence stays within the latency target.
pub fn level_probe(sc: &Scenario, name: &str) -> Result<Vec<LevelPoint>> {
    let platform = sc.platform_spec()?;
    let i = sc
        .workload_index(name)
        .ok_or_else(|| Error::config("workload", format!("no workload named `{name}`")))?;
    let mut w = sc.workloads[i].clone();
    w.phases.clear();
    w.start_cycle = 0;
    w.stop_cycle = None;
    let base = w.socket * platform.cores_per_socket;
    let cores: std::collections::BTreeSet<u32> = (base..base + w.threads).collect();
    let threshold = match sc.controller.read_threshold {
        AutoOr::Value(v) => v,
        AutoOr::Auto => default_read_threshold(&platform),
    };
    let line = platform.cacheline_bytes;
    let window = sc.controller.sample_period_cycles;
    [Level::Unrestricted, Level::L1, Level::L2, Level::L3]
        .into_iter()
        .map(|level| {
            let restriction = Restriction {
                cores: if level == Level::Unrestricted { Default::default() } else { cores.clone() },
                slots: level.slots(sc.controller.level_cores),
                min_issue_gap: None,
                quantum: sc.controller.quantum_cycles,
            };
            let win = probe(&platform, vec![w.clone()], restriction, 5 * window, 10 * window, sc.seed)?;
            let reads = win.txns[Tier::Cxl.index()][0];
            let total = win.tier_txns(Tier::Cxl);
            let frac = if total == 0 { 1.0 } else { reads as f64 / total as f64 };
            let target = target_cxl_latency(frac, threshold);
            let lat = win.class_latency(TorClass::Cxl).unwrap_or(0.0);
            Ok(LevelPoint {
                level: level.to_string(),
                cxl_gbps: bandwidth(win.tier_bytes(Tier::Cxl, line), win.cycles(), platform.clock_hz) / 1e9,
                cxl_latency: lat,
                target,
                backlog_free: lat <= target,
            })
        })
        .collect()
}

pub fn sustainable_cxl_gbps(points: &[LevelPoint]) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.backlog_free)
        .map(|p| p.cxl_gbps)
        .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

/// The scenario with only workload `name`, controller off.
pub fn isolated(sc: &Scenario, name: &str) -> Result<Scenario> {
    let mut out = sc.clone();
    out.workloads.retain(|w| w.name == name);
    if out.workloads.is_empty() {
        return Err(Error::config("workload", format!("no workload named `{name}`")));
    }
    out.llc.partitions.retain(|k, _| k == name);
    out.controller.mode = ControllerMode::Off;
    out.name = format!("{}_{}_alone", sc.name, name);
    Ok(out)
}

/// Write `report` as pretty JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_matches_device_specs() {
        let p = PlatformSpec::platform_a();
        let r = calibrate(&p, 1).unwrap();
        assert_eq!(r.unloaded_ddr_latency, 100.0);
        assert_eq!(r.unloaded_cxl_latency, 220.0);
        assert_eq!(r.suggested_read_threshold, 660.0);
        // Just-saturated DDR: service time plus a little hashing imbalance;
        // window edges can pull the ratio a fraction of a cycle below 100.
        assert!((99.0..130.0).contains(&r.t_ddr_ref), "{}", r.t_ddr_ref);
        // 8 × 16 slots / 100 cycles × 64 B at 1 GHz.
        assert!((r.ddr_peak_gbps - 81.92).abs() / 81.92 < 0.02, "{}", r.ddr_peak_gbps);
        assert!((r.cxl_peak_gbps - 20.48).abs() / 20.48 < 0.02, "{}", r.cxl_peak_gbps);
        assert!(r.loaded_cxl_latency > 3.0 * r.unloaded_cxl_latency);
    }

    #[test]
    fn empty_run_writes_headers() {
        let mut sc = Scenario::preset("fig4_corun").unwrap();
        sc.duration_cycles = 0;
        let dir = tempfile::tempdir().unwrap();
        let r = run_scenario(
            &sc,
            RunOptions { out_dir: Some(dir.path().into()), event_log: true, ..Default::default() },
        )
        .unwrap();
        assert!(r.metrics.windows.is_empty());
        let csv = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(csv, "window,t_start,t_end,series,value\n");
        let ev = fs::read_to_string(dir.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(ev.lines().count(), 1);
        assert_eq!(Summary::read(&dir.path().join(SUMMARY_FILE)).unwrap(), r.summary);
    }

    #[test]
    fn report_windows_cover_the_run() {
        let mut sc = Scenario::preset("fig4_corun").unwrap();
        sc.duration_cycles = 50_000;
        sc.report_window_cycles = Some(20_000);
        let r = run_scenario(&sc, RunOptions::default()).unwrap();
        let bounds: Vec<_> = r.metrics.windows.iter().map(|w| (w.t_start, w.t_end)).collect();
        assert_eq!(bounds, vec![(0, 20_000), (20_000, 40_000), (40_000, 50_000)]);
        assert_eq!(r.decisions.len(), 2);
    }

    #[test]
    fn sweep_keeps_input_order() {
        let mut sc = Scenario::preset("fig3_scaling").unwrap();
        sc.duration_cycles = 20_000;
        let runs = (0..3)
            .map(|s| {
                let mut x = sc.clone();
                x.seed = s;
                (x, RunOptions::default())
            })
            .collect();
        let out = sweep(runs, 2);
        let seeds: Vec<u64> = out.iter().map(|r| r.as_ref().unwrap().summary.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2]);
    }
}
