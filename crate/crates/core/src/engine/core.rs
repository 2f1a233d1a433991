use std::collections::BTreeSet;

use crate::platform::RequestKind;

/// A request the core produced but the IRQ has not yet accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Held {
    pub addr: u64,
    pub kind: RequestKind,
    pub t_issued: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct Core {
    pub socket: u32,
    /// (workload index, thread index)
    pub binding: Option<(usize, usize)>,
    pub mlp: u32,
    pub issue_interval: u64,
    pub outstanding: u32,
    pub held: Option<Held>,
    pub last_accept: Option<u64>,
    pub issued: u64,
    pub completed: u64,
    pub completed_bytes: u64,
    pub stalled_cycles: u64,
}

impl Core {
    pub fn new(socket: u32) -> Self {
        Core {
            socket,
            binding: None,
            mlp: 0,
            issue_interval: 1,
            outstanding: 0,
            held: None,
            last_accept: None,
            issued: 0,
            completed: 0,
            completed_bytes: 0,
            stalled_cycles: 0,
        }
    }
}

/// Confinement of a set of cores, the simulated counterpart of moving
/// threads into a CPU-quota group and capping their request rate.
///
/// With `slots = Some(k)` only `k` of the `n` restricted cores may issue at
/// a time; the active window rotates by `k` every `quantum` cycles so every
/// thread progresses. `min_issue_gap` caps each restricted core to one
/// request per that many cycles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    pub cores: BTreeSet<u32>,
    pub slots: Option<usize>,
    pub min_issue_gap: Option<u64>,
    pub quantum: u64,
}

impl Default for Restriction {
    fn default() -> Self {
        Restriction {
            cores: BTreeSet::new(),
            slots: None,
            min_issue_gap: None,
            quantum: 1000,
        }
    }
}

impl Restriction {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_none(&self) -> bool {
        self.cores.is_empty() || (self.slots.is_none() && self.min_issue_gap.is_none())
    }

    /// Whether `core` may issue at `now` under the slot rotation.
    pub fn active(&self, core: u32, now: u64) -> bool {
        let Some(k) = self.slots else { return true };
        let Some(idx) = self.cores.iter().position(|&c| c == core) else {
            return true;
        };
        let n = self.cores.len();
        if k >= n {
            return true;
        }
        let shift = ((now / self.quantum.max(1)) as usize * k) % n;
        (idx + n - shift) % n < k
    }

    pub fn gap(&self, core: u32) -> Option<u64> {
        self.min_issue_gap.filter(|_| self.cores.contains(&core))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: u32, k: usize) -> Restriction {
        Restriction {
            cores: (0..n).map(|c| c * 2).collect(),
            slots: Some(k),
            min_issue_gap: None,
            quantum: 10,
        }
    }

    #[test]
    fn exactly_k_active_every_cycle() {
        for (n, k) in [(16, 1), (16, 4), (16, 8), (5, 2), (3, 3)] {
            let res = r(n, k);
            for now in 0..500 {
                let active = res.cores.iter().filter(|&&c| res.active(c, now)).count();
                assert_eq!(active, k.min(n as usize));
            }
        }
    }

    #[test]
    fn rotation_covers_all_cores() {
        let res = r(16, 4);
        let mut seen = BTreeSet::new();
        for now in (0..40).step_by(10) {
            seen.extend(res.cores.iter().filter(|&&c| res.active(c, now)));
        }
        assert_eq!(seen, res.cores);
    }

    #[test]
    fn unrestricted_cores_always_active() {
        let res = r(4, 1);
        assert!(res.active(1, 0));
        assert!(res.active(7, 12345));
        assert_eq!(res.gap(1), None);
    }
}
