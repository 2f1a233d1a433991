use crate::error::{Error, Result};
use crate::platform::{PlatformSpec, RequestKind, Tier, PAGE_BYTES};

use super::{build_chase, ChaseChain, Pattern, WorkloadSpec};

/// Physical base of a workload's backing store on each tier it may touch.
///
/// Each tier reserves the whole working set; a page lands at its packed
/// index within the tier, so a placement change only remaps pages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Backing {
    pub ddr_base: Option<u64>,
    pub cxl_base: Option<u64>,
}

impl Backing {
    fn base(&self, tier: Tier) -> u64 {
        match tier {
            Tier::Ddr => self.ddr_base,
            Tier::Cxl => self.cxl_base,
        }
        .expect("placement validated against backing")
    }
}

/// Carve non-overlapping page-aligned backing regions out of each socket's
/// tier ranges, in declaration order.
pub fn layout(platform: &PlatformSpec, specs: &[WorkloadSpec]) -> Result<Vec<Backing>> {
    let mut next: Vec<[u64; 2]> = (0..platform.sockets)
        .map(|s| {
            [
                platform.socket_range(Tier::Ddr, s).start,
                platform.socket_range(Tier::Cxl, s).start,
            ]
        })
        .collect();
    let mut out = Vec::with_capacity(specs.len());
    for w in specs {
        let at = format!("workloads[{}]", w.name);
        let sock = w.mem_socket();
        if sock >= platform.sockets {
            return Err(Error::config(at, format!("mem_socket {sock} does not exist")));
        }
        let size = w.wss_bytes.div_ceil(PAGE_BYTES) * PAGE_BYTES;
        let mut b = Backing::default();
        for tier in Tier::ALL {
            if !w.uses_tier(tier) {
                continue;
            }
            let range = platform.socket_range(tier, sock);
            let base = next[sock as usize][tier.index()];
            if base + size > range.end {
                return Err(Error::config(
                    at,
                    format!("placement does not fit the {tier} range of socket {sock}"),
                ));
            }
            next[sock as usize][tier.index()] = base + size;
            match tier {
                Tier::Ddr => b.ddr_base = Some(base),
                Tier::Cxl => b.cxl_base = Some(base),
            }
        }
        out.push(b);
    }
    Ok(out)
}

/// Live generator state for one workload.
#[derive(Debug, Clone)]
pub struct WorkloadRuntime {
    pub spec: WorkloadSpec,
    /// Global core id of each thread.
    pub cores: Vec<u32>,
    backing: Backing,
    line: u64,
    region_lines: u64,
    cursors: Vec<u64>,
    chains: Vec<ChaseChain>,
    turn: usize,
    in_flight: bool,
    /// Per-request latencies for latency-oriented patterns (chase hops, atomic updates).
    pub latencies: Vec<u64>,
}

impl WorkloadRuntime {
    pub fn new(spec: WorkloadSpec, cores: Vec<u32>, backing: Backing, line: u64, seed: u64) -> Result<Self> {
        let region_lines = spec.wss_bytes / spec.threads as u64 / line;
        let chains = if spec.pattern == Pattern::PointerChase {
            let base = spec.seed.unwrap_or(seed);
            (0..spec.threads as u64)
                .map(|t| build_chase(region_lines, base.wrapping_add(t.wrapping_mul(0x9e37_79b9_7f4a_7c15))))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(WorkloadRuntime {
            cursors: vec![0; spec.threads as usize],
            spec,
            cores,
            backing,
            line,
            region_lines,
            chains,
            turn: 0,
            in_flight: false,
            latencies: Vec::new(),
        })
    }

    /// Logical byte range `[start, end)` of a thread's private region.
    pub fn region(&self, thread: usize) -> (u64, u64) {
        let len = self.region_lines * self.line;
        (thread as u64 * len, (thread as u64 + 1) * len)
    }

    pub fn physical(&self, logical: u64, now: u64) -> u64 {
        let (tier, page) = self.spec.placement_at(now).locate_page(logical / PAGE_BYTES);
        self.backing.base(tier) + page * PAGE_BYTES + logical % PAGE_BYTES
    }

    /// Whether the thread has a request to offer at `now` (ignores MLP and rate gates).
    pub fn can_generate(&self, thread: usize, now: u64) -> bool {
        if !self.spec.is_active(now) {
            return false;
        }
        match self.spec.pattern {
            Pattern::SharedAtomic => self.turn == thread && !self.in_flight,
            _ => true,
        }
    }

    pub fn generate(&mut self, thread: usize, now: u64) -> (u64, RequestKind) {
        let (start, _) = self.region(thread);
        match self.spec.pattern {
            Pattern::BwStream => {
                let c = &mut self.cursors[thread];
                let logical = start + *c * self.line;
                *c = (*c + 1) % self.region_lines;
                (self.physical(logical, now), self.spec.kind.request_kind())
            }
            Pattern::PointerChase => {
                let logical = start + self.chains[thread].current() as u64 * self.line;
                (self.physical(logical, now), RequestKind::Load)
            }
            Pattern::SharedAtomic => (self.physical(0, now), RequestKind::Coherence),
        }
    }

    pub fn on_accept(&mut self, _thread: usize) {
        if self.spec.pattern == Pattern::SharedAtomic {
            self.in_flight = true;
        }
    }

    pub fn on_complete(&mut self, thread: usize, latency: u64) {
        match self.spec.pattern {
            Pattern::BwStream => {}
            Pattern::PointerChase => {
                self.chains[thread].advance();
                self.latencies.push(latency);
            }
            Pattern::SharedAtomic => {
                self.in_flight = false;
                self.turn = 1 - thread;
                self.latencies.push(latency);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{AccessKind, Phase, Placement};

    fn rt(spec: WorkloadSpec) -> WorkloadRuntime {
        let p = PlatformSpec::platform_a();
        let b = layout(&p, std::slice::from_ref(&spec)).unwrap()[0];
        let cores = (0..spec.threads).collect();
        WorkloadRuntime::new(spec, cores, b, 64, 1).unwrap()
    }

    #[test]
    fn stream_is_sequential_and_wraps() {
        let mut w = WorkloadSpec::bw_stream("s", 1, Placement::DdrOnly, AccessKind::Load);
        w.wss_bytes = 256;
        let mut r = rt(w);
        let addrs: Vec<u64> = (0..6).map(|_| r.generate(0, 0).0).collect();
        assert_eq!(addrs, vec![0, 64, 128, 192, 0, 64]);
    }

    #[test]
    fn thread_regions_disjoint() {
        let mut w = WorkloadSpec::bw_stream("s", 16, Placement::DdrOnly, AccessKind::Load);
        w.wss_bytes = 16 << 30;
        let r = rt(w);
        for a in 0..16 {
            for b in a + 1..16 {
                let (s1, e1) = r.region(a);
                let (s2, e2) = r.region(b);
                assert!(e1 <= s2 || e2 <= s1);
            }
        }
        assert_eq!(r.region(1), (1 << 30, 2 << 30));
    }

    #[test]
    fn layouts_do_not_overlap() {
        let p = PlatformSpec::platform_a();
        let a = WorkloadSpec::bw_stream("a", 4, Placement::DdrOnly, AccessKind::Load);
        let mut b = WorkloadSpec::bw_stream("b", 4, Placement::CxlOnly, AccessKind::Load);
        b.phases = vec![Phase { placement: Placement::DdrOnly, duration_cycles: 10 }];
        let l = layout(&p, &[a.clone(), b]).unwrap();
        assert_eq!(l[0].ddr_base, Some(0));
        assert_eq!(l[0].cxl_base, None);
        assert_eq!(l[1].ddr_base, Some(a.wss_bytes));
        assert_eq!(l[1].cxl_base, Some(p.cxl_phys_range.start));
    }

    #[test]
    fn oversized_placement_rejected() {
        let p = PlatformSpec::platform_a();
        let mut a = WorkloadSpec::bw_stream("huge", 1, Placement::DdrOnly, AccessKind::Load);
        a.wss_bytes = 1 << 50;
        let e = layout(&p, &[a]).unwrap_err().to_string();
        assert!(e.contains("huge"));
    }

    #[test]
    fn phase_switch_moves_addresses() {
        let mut w = WorkloadSpec::bw_stream("s", 1, Placement::DdrOnly, AccessKind::Load);
        w.phases = vec![
            Phase { placement: Placement::DdrOnly, duration_cycles: 10 },
            Phase { placement: Placement::CxlOnly, duration_cycles: 10 },
        ];
        let mut r = rt(w);
        let p = PlatformSpec::platform_a();
        assert_eq!(p.address_to_tier(r.generate(0, 9).0).unwrap(), Tier::Ddr);
        assert_eq!(p.address_to_tier(r.generate(0, 10).0).unwrap(), Tier::Cxl);
    }

    #[test]
    fn atomic_pair_alternates() {
        let mut r = rt(WorkloadSpec::shared_atomic("pair", Placement::DdrOnly));
        assert!(r.can_generate(0, 0));
        assert!(!r.can_generate(1, 0));
        let (a0, k) = r.generate(0, 0);
        assert_eq!(k, RequestKind::Coherence);
        r.on_accept(0);
        assert!(!r.can_generate(0, 1));
        assert!(!r.can_generate(1, 1));
        r.on_complete(0, 60);
        assert!(r.can_generate(1, 2));
        assert_eq!(r.generate(1, 2).0, a0);
    }
}
