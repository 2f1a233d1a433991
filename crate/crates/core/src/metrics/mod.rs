//! Windowed reduction of engine counters: ToR latency by Little's law,
//! per-tier bandwidth, tier census, and report serialization.

mod export;
mod stats;

pub use export::{
    read_metrics_csv, write_controller_csv, write_metrics_csv, CsvRow, EventLogWriter, Summary,
    TierTotals, WorkloadSummary, SCHEMA_VERSION,
};
pub(crate) use export::round6;
pub use stats::{avg_tor_latency, bandwidth, mean, percentiles};

use crate::engine::{Snapshot, TorClass};
use crate::error::Result;
use crate::platform::Tier;

/// Per-CHA deltas over one window plus the census at its end.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChaWindow {
    pub inserts: [u64; 3],
    pub occupancy: [u64; 3],
    pub census: [u32; 3],
}

impl ChaWindow {
    pub fn inserts_total(&self) -> u64 {
        self.inserts.iter().sum()
    }

    pub fn occupancy_total(&self) -> u64 {
        self.occupancy.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub index: usize,
    pub t_start: u64,
    pub t_end: u64,
    pub chas: Vec<ChaWindow>,
    /// Completed device transactions, `[tier][read, write]`.
    pub txns: [[u64; 2]; 2],
    pub workload_requests: Vec<u64>,
}

impl WindowRecord {
    pub fn from_snapshots(index: usize, a: &Snapshot, b: &Snapshot) -> Self {
        let chas = a
            .chas
            .iter()
            .zip(&b.chas)
            .map(|(x, y)| ChaWindow {
                inserts: std::array::from_fn(|i| y.inserts[i] - x.inserts[i]),
                occupancy: std::array::from_fn(|i| y.occupancy[i] - x.occupancy[i]),
                census: y.live,
            })
            .collect();
        WindowRecord {
            index,
            t_start: a.cycle,
            t_end: b.cycle,
            chas,
            txns: std::array::from_fn(|t| std::array::from_fn(|c| b.txns[t][c] - a.txns[t][c])),
            workload_requests: a
                .workload_completed
                .iter()
                .zip(&b.workload_completed)
                .map(|(x, y)| y - x)
                .collect(),
        }
    }

    pub fn cycles(&self) -> u64 {
        self.t_end - self.t_start
    }

    pub fn tier_txns(&self, tier: Tier) -> u64 {
        self.txns[tier.index()].iter().sum()
    }

    pub fn tier_bytes(&self, tier: Tier, line: u64) -> u64 {
        self.tier_txns(tier) * line
    }

    pub fn inserts(&self, class: TorClass) -> u64 {
        self.chas.iter().map(|c| c.inserts[class.index()]).sum()
    }

    pub fn occupancy(&self, class: TorClass) -> u64 {
        self.chas.iter().map(|c| c.occupancy[class.index()]).sum()
    }

    pub fn census(&self, class: TorClass) -> u64 {
        self.chas.iter().map(|c| c.census[class.index()] as u64).sum()
    }

    /// Mean ToR residence of one CHA over this window.
    pub fn cha_latency(&self, cha: usize) -> Result<f64> {
        let c = &self.chas[cha];
        avg_tor_latency(c.occupancy_total(), c.inserts_total())
    }

    /// Mean ToR residence of one class across all CHAs.
    pub fn class_latency(&self, class: TorClass) -> Result<f64> {
        avg_tor_latency(self.occupancy(class), self.inserts(class))
    }
}

/// Window series for one run.
#[derive(Debug, Clone)]
pub struct MetricsStore {
    pub line: u64,
    pub clock_hz: f64,
    pub workload_names: Vec<String>,
    pub windows: Vec<WindowRecord>,
}

impl MetricsStore {
    pub fn new(line: u64, clock_hz: f64, workload_names: Vec<String>) -> Self {
        MetricsStore {
            line,
            clock_hz,
            workload_names,
            windows: Vec::new(),
        }
    }

    pub fn record(&mut self, a: &Snapshot, b: &Snapshot) -> &WindowRecord {
        let w = WindowRecord::from_snapshots(self.windows.len(), a, b);
        self.windows.push(w);
        self.windows.last().unwrap()
    }

    pub fn bandwidth(&self, w: &WindowRecord, tier: Tier) -> f64 {
        bandwidth(w.tier_bytes(tier, self.line), w.cycles(), self.clock_hz)
    }

    /// Request throughput of workload `i` in bytes per second.
    pub fn workload_bandwidth(&self, w: &WindowRecord, i: usize) -> f64 {
        bandwidth(w.workload_requests[i] * self.line, w.cycles(), self.clock_hz)
    }

    pub fn total_bytes(&self, tier: Tier) -> u64 {
        self.windows.iter().map(|w| w.tier_bytes(tier, self.line)).sum()
    }

    pub fn total_cycles(&self) -> u64 {
        self.windows.iter().map(|w| w.cycles()).sum()
    }

    /// Mean bandwidth of `tier` over windows `[from, to)`.
    pub fn mean_bandwidth(&self, tier: Tier, from: usize, to: usize) -> f64 {
        let ws = &self.windows[from..to];
        let bytes: u64 = ws.iter().map(|w| w.tier_bytes(tier, self.line)).sum();
        let cycles: u64 = ws.iter().map(|w| w.cycles()).sum();
        bandwidth(bytes, cycles, self.clock_hz)
    }

    pub fn mean_workload_bandwidth(&self, i: usize, from: usize, to: usize) -> f64 {
        let ws = &self.windows[from..to];
        let req: u64 = ws.iter().map(|w| w.workload_requests[i]).sum();
        let cycles: u64 = ws.iter().map(|w| w.cycles()).sum();
        bandwidth(req * self.line, cycles, self.clock_hz)
    }
}
