//! Synthetic request generators: sequential bandwidth streams, pointer
//! chasing and a two-core shared-line atomic, bound to cores and placed on
//! memory tiers.

mod chase;
mod runtime;

pub use chase::{build_chase, ChaseChain};
pub use runtime::{layout, Backing, WorkloadRuntime};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::{RequestKind, Tier, PAGE_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    BwStream,
    PointerChase,
    SharedAtomic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    #[default]
    Load,
    Store,
    NtStore,
}

impl AccessKind {
    pub fn request_kind(self) -> RequestKind {
        match self {
            AccessKind::Load => RequestKind::Load,
            AccessKind::Store => RequestKind::Store,
            AccessKind::NtStore => RequestKind::NtStore,
        }
    }
}

/// Where the pages of a workload live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    DdrOnly,
    CxlOnly,
    /// Page-granular weighted interleave: out of every `ddr + cxl` consecutive
    /// pages the first `ddr` go to DDR.
    Interleave { ddr: u32, cxl: u32 },
}

impl Placement {
    pub fn tier_for_page(self, page: u64) -> Tier {
        self.locate_page(page).0
    }

    /// Tier of logical page `page` and its index among the pages placed on
    /// that tier, so each tier's share is packed densely.
    pub fn locate_page(self, page: u64) -> (Tier, u64) {
        match self {
            Placement::DdrOnly => (Tier::Ddr, page),
            Placement::CxlOnly => (Tier::Cxl, page),
            Placement::Interleave { ddr, cxl } => {
                let (d, c) = (ddr as u64, cxl as u64);
                let (round, pos) = (page / (d + c), page % (d + c));
                if pos < d {
                    (Tier::Ddr, round * d + pos)
                } else {
                    (Tier::Cxl, round * c + pos - d)
                }
            }
        }
    }

    pub fn uses(self, tier: Tier) -> bool {
        match self {
            Placement::DdrOnly => tier == Tier::Ddr,
            Placement::CxlOnly => tier == Tier::Cxl,
            Placement::Interleave { ddr, cxl } => match tier {
                Tier::Ddr => ddr > 0,
                Tier::Cxl => cxl > 0,
            },
        }
    }

    fn validate(self, at: &str) -> Result<()> {
        if let Placement::Interleave { ddr, cxl } = self {
            if ddr + cxl == 0 {
                return Err(Error::config(at, "interleave ratio must not be 0:0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub placement: Placement,
    pub duration_cycles: u64,
}

fn one_u32() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub pattern: Pattern,
    #[serde(default)]
    pub kind: AccessKind,
    /// Total working set, split evenly across threads.
    pub wss_bytes: u64,
    pub placement: Placement,
    #[serde(default = "one_u32")]
    pub threads: u32,
    #[serde(default = "one_u32")]
    pub mlp_per_thread: u32,
    /// Minimum cycles between two issues of the same thread (per-thread
    /// request-rate ceiling). 1 means one request per cycle.
    #[serde(default = "one_u64")]
    pub issue_interval: u64,
    /// Socket whose cores run the threads.
    #[serde(default)]
    pub socket: u32,
    /// Socket whose memory backs the working set; defaults to `socket`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_socket: Option<u32>,
    /// Placement schedule, cycled round-robin. Overrides `placement` when non-empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<Phase>,
    #[serde(default)]
    pub start_cycle: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_cycle: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl WorkloadSpec {
    /// A bandwidth stream with the given thread count and placement.
    pub fn bw_stream(name: &str, threads: u32, placement: Placement, kind: AccessKind) -> Self {
        WorkloadSpec {
            name: name.into(),
            pattern: Pattern::BwStream,
            kind,
            wss_bytes: threads as u64 * (1 << 20),
            placement,
            threads,
            mlp_per_thread: 48,
            issue_interval: 1,
            socket: 0,
            mem_socket: None,
            phases: Vec::new(),
            start_cycle: 0,
            stop_cycle: None,
            seed: None,
        }
    }

    pub fn pointer_chase(name: &str, wss_bytes: u64, placement: Placement) -> Self {
        WorkloadSpec {
            pattern: Pattern::PointerChase,
            wss_bytes,
            threads: 1,
            mlp_per_thread: 1,
            ..Self::bw_stream(name, 1, placement, AccessKind::Load)
        }
    }

    pub fn shared_atomic(name: &str, placement: Placement) -> Self {
        WorkloadSpec {
            pattern: Pattern::SharedAtomic,
            wss_bytes: PAGE_BYTES,
            threads: 2,
            mlp_per_thread: 1,
            ..Self::bw_stream(name, 2, placement, AccessKind::Load)
        }
    }

    pub fn mem_socket(&self) -> u32 {
        self.mem_socket.unwrap_or(self.socket)
    }

    /// Outstanding-request bound actually enforced per thread.
    pub fn effective_mlp(&self) -> u32 {
        match self.pattern {
            Pattern::BwStream => self.mlp_per_thread,
            Pattern::PointerChase | Pattern::SharedAtomic => 1,
        }
    }

    /// Placement in force at cycle `now`.
    pub fn placement_at(&self, now: u64) -> Placement {
        if self.phases.is_empty() {
            return self.placement;
        }
        let total: u64 = self.phases.iter().map(|p| p.duration_cycles).sum();
        let mut t = now.saturating_sub(self.start_cycle) % total;
        for p in &self.phases {
            if t < p.duration_cycles {
                return p.placement;
            }
            t -= p.duration_cycles;
        }
        unreachable!("phase offset lies inside the cycle")
    }

    pub fn uses_tier(&self, tier: Tier) -> bool {
        self.placement.uses(tier) || self.phases.iter().any(|p| p.placement.uses(tier))
    }

    pub fn is_active(&self, now: u64) -> bool {
        now >= self.start_cycle && self.stop_cycle.is_none_or(|s| now < s)
    }

    pub fn validate(&self, line: u64) -> Result<()> {
        let at = format!("workloads[{}]", self.name);
        if self.name.is_empty() {
            return Err(Error::config("workloads[]", "workload name must not be empty"));
        }
        if self.threads == 0 {
            return Err(Error::config(&at, "threads must be >= 1"));
        }
        if self.wss_bytes < line {
            return Err(Error::config(&at, "wss_bytes must be at least one cacheline"));
        }
        if self.wss_bytes / (self.threads as u64) < line {
            return Err(Error::config(&at, "wss_bytes leaves less than one cacheline per thread"));
        }
        if self.mlp_per_thread == 0 {
            return Err(Error::config(&at, "mlp_per_thread must be >= 1"));
        }
        if self.issue_interval == 0 {
            return Err(Error::config(&at, "issue_interval must be >= 1"));
        }
        self.placement.validate(&at)?;
        for p in &self.phases {
            if p.duration_cycles == 0 {
                return Err(Error::config(&at, "phase durations must be > 0"));
            }
            p.placement.validate(&at)?;
        }
        match self.pattern {
            Pattern::SharedAtomic if self.threads != 2 => {
                Err(Error::config(&at, "shared_atomic needs exactly 2 threads"))
            }
            Pattern::PointerChase if self.wss_bytes / self.threads as u64 / line < 2 => {
                Err(Error::config(&at, "pointer_chase needs >= 2 cachelines per thread"))
            }
            _ => Ok(()),
        }
    }
}

/// Fraction of `latencies` strictly below each threshold.
pub fn tail_histogram(latencies: &[u64], thresholds: &[u64]) -> Result<Vec<f64>> {
    if latencies.is_empty() {
        return Err(Error::NoMeasurement("tail histogram over zero samples"));
    }
    let mut sorted = latencies.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&x| x < t) as f64 / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_histogram_examples() {
        assert_eq!(tail_histogram(&[100; 5], &[101]).unwrap(), vec![1.0]);
        assert_eq!(tail_histogram(&[100; 5], &[100]).unwrap(), vec![0.0]);
        assert_eq!(tail_histogram(&[100, 100, 300, 500], &[200]).unwrap(), vec![0.5]);
        assert!(tail_histogram(&[], &[1]).is_err());
    }

    #[test]
    fn tail_histogram_monotone() {
        let lat = [5, 9, 1, 400, 33, 33, 70];
        let th: Vec<u64> = (0..500).step_by(7).collect();
        let f = tail_histogram(&lat, &th).unwrap();
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn interleave_ratio_exact_over_window() {
        let p = Placement::Interleave { ddr: 3, cxl: 1 };
        for start in [0u64, 1, 2, 17, 1001] {
            let ddr = (start..start + 4).filter(|&pg| p.tier_for_page(pg) == Tier::Ddr).count();
            assert_eq!(ddr, 3);
        }
    }

    #[test]
    fn interleaved_pages_pack_densely_per_tier() {
        let p = Placement::Interleave { ddr: 1, cxl: 1 };
        let cxl: Vec<u64> = (0..8).map(|pg| p.locate_page(pg)).filter(|l| l.0 == Tier::Cxl).map(|l| l.1).collect();
        assert_eq!(cxl, [0, 1, 2, 3]);
        let p = Placement::Interleave { ddr: 2, cxl: 3 };
        let all: Vec<(Tier, u64)> = (0..5).map(|pg| p.locate_page(pg)).collect();
        assert_eq!(all, [(Tier::Ddr, 0), (Tier::Ddr, 1), (Tier::Cxl, 0), (Tier::Cxl, 1), (Tier::Cxl, 2)]);
        assert_eq!(p.locate_page(5), (Tier::Ddr, 2));
        assert_eq!(Placement::CxlOnly.locate_page(9), (Tier::Cxl, 9));
    }

    #[test]
    fn phases_cycle_round_robin() {
        let mut w = WorkloadSpec::bw_stream("w", 1, Placement::DdrOnly, AccessKind::Load);
        w.phases = vec![
            Phase { placement: Placement::DdrOnly, duration_cycles: 100 },
            Phase { placement: Placement::CxlOnly, duration_cycles: 50 },
        ];
        assert_eq!(w.placement_at(0), Placement::DdrOnly);
        assert_eq!(w.placement_at(99), Placement::DdrOnly);
        assert_eq!(w.placement_at(100), Placement::CxlOnly);
        assert_eq!(w.placement_at(149), Placement::CxlOnly);
        assert_eq!(w.placement_at(150), Placement::DdrOnly);
    }

    #[test]
    fn validation_errors_name_the_workload() {
        let mut w = WorkloadSpec::shared_atomic("pair", Placement::DdrOnly);
        w.threads = 3;
        let e = w.validate(64).unwrap_err().to_string();
        assert!(e.contains("pair"), "{e}");
        let mut w = WorkloadSpec::bw_stream("s", 2, Placement::DdrOnly, AccessKind::Load);
        w.wss_bytes = 32;
        assert!(w.validate(64).is_err());
        let w = WorkloadSpec::bw_stream("s", 2, Placement::Interleave { ddr: 0, cxl: 0 }, AccessKind::Load);
        assert!(w.validate(64).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let w: WorkloadSpec = serde_json::from_str(
            r#"{"name":"a","pattern":"bw_stream","kind":"store","wss_bytes":4096,
                "placement":{"interleave":{"ddr":1,"cxl":1}},"threads":2}"#,
        )
        .unwrap();
        assert_eq!(w.kind, AccessKind::Store);
        assert_eq!(w.placement, Placement::Interleave { ddr: 1, cxl: 1 });
        assert_eq!(w.mlp_per_thread, 1);
        let back: WorkloadSpec = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
    }
}
