use crate::platform::{RequestKind, Tier};

/// Bucket a ToR entry is accounted under. Only the memory classes feed the
/// backlog estimator; LLC hits and coherence traffic land in `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TorClass {
    Ddr,
    Cxl,
    Other,
}

impl TorClass {
    pub const ALL: [TorClass; 3] = [TorClass::Ddr, TorClass::Cxl, TorClass::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn of_tier(tier: Tier) -> Self {
        match tier {
            Tier::Ddr => TorClass::Ddr,
            Tier::Cxl => TorClass::Cxl,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TorClass::Ddr => "ddr",
            TorClass::Cxl => "cxl",
            TorClass::Other => "other",
        }
    }
}

/// One in-flight request. Timestamps are cycle numbers; `None` until reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub core: u32,
    pub workload: u32,
    pub thread: u32,
    pub kind: RequestKind,
    pub addr: u64,
    pub tier: Tier,
    /// Global CHA index (`home_socket * chas_per_socket + local`).
    pub cha: u32,
    pub class: TorClass,
    pub remote: bool,
    pub llc_hit: bool,
    pub t_issued: u64,
    pub t_irq: Option<u64>,
    pub t_tor: Option<u64>,
    pub t_dispatch: Option<u64>,
    pub t_complete: Option<u64>,
    pub(crate) pending_txns: u8,
}

impl Request {
    /// ToR residence, once retired.
    pub fn residence(&self) -> Option<u64> {
        Some(self.t_complete? - self.t_tor?)
    }

    /// Core-observed latency, once retired.
    pub fn latency(&self) -> Option<u64> {
        Some(self.t_complete? - self.t_issued)
    }

    /// Timestamps are ordered wherever set.
    pub fn timestamps_ordered(&self) -> bool {
        let mut prev = self.t_issued;
        for t in [self.t_irq, self.t_tor, self.t_dispatch, self.t_complete].into_iter().flatten() {
            if t < prev {
                return false;
            }
            prev = t;
        }
        true
    }
}
