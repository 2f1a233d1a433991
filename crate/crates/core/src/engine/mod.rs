//! Cycle-stepped model of the core → IRQ → ToR → device pipeline.
//!
//! Every cycle runs five phases in a fixed order:
//!
//! 1. device events due this cycle (slot releases, transaction completions,
//!    LLC-hit and coherence completions),
//! 2. ToR retirements, lowest request id first,
//! 3. IRQ → ToR admission per CHA, strictly FIFO, at most `admit_width`,
//! 4. core issue into the IRQs,
//! 5. occupancy integrals.
//!
//! Work done in phase 4 of cycle `t` becomes visible at the boundary `t + 1`,
//! so it is stamped `t + 1`; admission and retirement stamp the cycle they
//! run in. A ToR entry is therefore resident over `[t_tor, t_complete)`,
//! exactly the cycles it contributes to the occupancy integral.
//!
//! Device activity is driven by a time-ordered event heap rather than by
//! polling; observable behaviour is the same as checking every slot every
//! cycle.

mod core;
mod device;
mod request;

pub use self::core::Restriction;
pub use request::{Request, TorClass};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use slab::Slab;

use self::core::{Core, Held};
use device::{Accept, Device, Txn};

use crate::error::{Error, Result};
use crate::llc::LlcModel;
use crate::platform::{decompose, PlatformSpec, RequestKind, Tier, TxnClass};
use crate::workloads::{layout, WorkloadRuntime, WorkloadSpec};

/// Receives every request as it leaves the ToR.
pub trait EventSink: Send {
    fn record(&mut self, req: &Request);

    /// Called once at the end of a run with the requests still in flight.
    fn finish(&mut self, in_flight: &[&Request]) -> Result<()> {
        for r in in_flight {
            self.record(r);
        }
        Ok(())
    }
}

/// Fans every event out to several sinks.
pub struct Tee(pub Vec<Box<dyn EventSink>>);

impl EventSink for Tee {
    fn record(&mut self, req: &Request) {
        for s in &mut self.0 {
            s.record(req);
        }
    }

    fn finish(&mut self, in_flight: &[&Request]) -> Result<()> {
        for s in &mut self.0 {
            s.finish(in_flight)?;
        }
        Ok(())
    }
}

impl<F: FnMut(&Request) + Send> EventSink for F {
    fn record(&mut self, req: &Request) {
        self(req)
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub seed: u64,
    /// Exponentially distributed service times with the configured mean.
    pub jitter: bool,
    /// Check conservation and work-conservation after every cycle.
    pub check_invariants: bool,
    pub llc: Option<LlcOptions>,
    /// PEBS-style sampling: one in `sampling_rate_n` retired requests per core.
    pub sampling_rate_n: u32,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 0,
            jitter: false,
            check_invariants: false,
            llc: None,
            sampling_rate_n: 64,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LlcOptions {
    /// Per-socket capacity; defaults to the platform's.
    pub capacity_bytes: Option<u64>,
    /// Partition fraction per workload index.
    pub partitions: Vec<(usize, f64)>,
}

/// Cumulative per-CHA ToR counters, indexed by [`TorClass::index`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChaCounters {
    pub inserts: [u64; 3],
    pub occupancy: [u64; 3],
    /// Entries resident right now.
    pub live: [u32; 3],
    pub irq_len: u32,
}

impl ChaCounters {
    pub fn live_total(&self) -> u32 {
        self.live.iter().sum()
    }
}

/// Cumulative counters at a cycle boundary. Differences of two snapshots
/// give window statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub cycle: u64,
    pub chas: Vec<ChaCounters>,
    /// Completed device transactions, `[tier][read, write]`.
    pub txns: [[u64; 2]; 2],
    /// Retired requests per workload.
    pub workload_completed: Vec<u64>,
    pub core_issued: Vec<u64>,
    pub core_completed_bytes: Vec<u64>,
    pub core_stalled: Vec<u64>,
    pub issued: u64,
    pub completed: u64,
}

/// One PEBS-style sample: which core touched which tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub core: u32,
    pub tier: Tier,
    pub addr: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    SlotFree { dev: usize },
    TxnDone { req: usize, class: TxnClass },
    Done { req: usize },
}

pub struct Simulation {
    platform: PlatformSpec,
    now: u64,
    next_id: u64,
    seq: u64,
    cores: Vec<Core>,
    /// Bound cores in id order.
    active_cores: Vec<u32>,
    irqs: Vec<VecDeque<usize>>,
    chas: Vec<ChaCounters>,
    last_admit_irq: Vec<u64>,
    devices: Vec<Device>,
    requests: Slab<Request>,
    events: BinaryHeap<Reverse<(u64, u64, Ev)>>,
    done: Vec<usize>,
    workloads: Vec<WorkloadRuntime>,
    llc: Option<Vec<LlcModel>>,
    restriction: Restriction,
    rng: ChaCha8Rng,
    jitter: bool,
    check: bool,
    violations: Vec<String>,
    txns: [[u64; 2]; 2],
    workload_completed: Vec<u64>,
    issued: u64,
    completed: u64,
    sample_n: u32,
    sample_countdown: Vec<u32>,
    samples: Vec<Sample>,
    sink: Option<Box<dyn EventSink>>,
    order: Vec<(u64, u32)>,
}

const MAX_VIOLATIONS: usize = 16;

impl Simulation {
    pub fn new(platform: PlatformSpec, specs: Vec<WorkloadSpec>, opts: SimOptions) -> Result<Self> {
        platform.validate()?;
        let line = platform.cacheline_bytes;
        for w in &specs {
            w.validate(line)?;
            if w.socket >= platform.sockets {
                return Err(Error::config(
                    format!("workloads[{}]", w.name),
                    format!("socket {} does not exist", w.socket),
                ));
            }
        }
        let backing = layout(&platform, &specs)?;

        let mut cores: Vec<Core> = (0..platform.total_cores())
            .map(|c| Core::new(c / platform.cores_per_socket))
            .collect();
        let mut next_free = vec![0u32; platform.sockets as usize];
        let mut workloads = Vec::with_capacity(specs.len());
        for (wi, (spec, b)) in specs.into_iter().zip(backing).enumerate() {
            let s = spec.socket as usize;
            if next_free[s] + spec.threads > platform.cores_per_socket {
                return Err(Error::config(
                    format!("workloads[{}]", spec.name),
                    format!("not enough free cores on socket {}", spec.socket),
                ));
            }
            let ids: Vec<u32> = (0..spec.threads)
                .map(|t| spec.socket * platform.cores_per_socket + next_free[s] + t)
                .collect();
            next_free[s] += spec.threads;
            for (t, &c) in ids.iter().enumerate() {
                let core = &mut cores[c as usize];
                core.binding = Some((wi, t));
                core.mlp = spec.effective_mlp();
                core.issue_interval = spec.issue_interval;
            }
            let seed = opts.seed ^ (wi as u64 + 1).wrapping_mul(0xa076_1d64_78bd_642f);
            workloads.push(WorkloadRuntime::new(spec, ids, b, line, seed)?);
        }
        let active_cores = (0..cores.len() as u32)
            .filter(|&c| cores[c as usize].binding.is_some())
            .collect();

        let mut devices = Vec::new();
        for tier in Tier::ALL {
            for _ in 0..platform.sockets {
                devices.extend(platform.devices(tier).iter().cloned().map(Device::new));
            }
        }

        let llc = opts.llc.as_ref().map(|o| {
            let cap = o.capacity_bytes.unwrap_or(platform.llc_capacity_bytes);
            let wss: Vec<u64> = workloads.iter().map(|w| w.spec.wss_bytes).collect();
            (0..platform.sockets)
                .map(|s| {
                    let mut m = LlcModel::new(cap, line, wss.clone(), opts.seed ^ (0x11c0 + s as u64));
                    for &(w, f) in &o.partitions {
                        m.set_partition(w, Some(f))?;
                    }
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()
        });
        let llc = llc.transpose()?;

        let n_chas = platform.total_chas() as usize;
        let n_cores = cores.len();
        let n_wl = workloads.len();
        let sample_n = opts.sampling_rate_n.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let sample_countdown = (0..n_cores)
            .map(|_| rand::Rng::gen_range(&mut rng, 1..=sample_n))
            .collect();
        Ok(Simulation {
            platform,
            now: 0,
            next_id: 0,
            seq: 0,
            cores,
            active_cores,
            irqs: vec![VecDeque::new(); n_chas],
            chas: vec![ChaCounters::default(); n_chas],
            last_admit_irq: vec![0; n_chas],
            devices,
            requests: Slab::new(),
            events: BinaryHeap::new(),
            done: Vec::new(),
            workloads,
            llc,
            restriction: Restriction::none(),
            rng,
            jitter: opts.jitter,
            check: opts.check_invariants,
            violations: Vec::new(),
            txns: [[0; 2]; 2],
            workload_completed: vec![0; n_wl],
            issued: 0,
            completed: 0,
            sample_n,
            sample_countdown,
            samples: Vec::new(),
            sink: None,
            order: Vec::new(),
        })
    }

    pub fn platform(&self) -> &PlatformSpec {
        &self.platform
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn workloads(&self) -> &[WorkloadRuntime] {
        &self.workloads
    }

    pub fn workload_mut(&mut self, i: usize) -> &mut WorkloadRuntime {
        &mut self.workloads[i]
    }

    pub fn llc(&self, socket: u32) -> Option<&LlcModel> {
        self.llc.as_ref().map(|v| &v[socket as usize])
    }

    pub fn llc_mut(&mut self, socket: u32) -> Option<&mut LlcModel> {
        self.llc.as_mut().map(|v| &mut v[socket as usize])
    }

    pub fn set_sink(&mut self, sink: Box<dyn EventSink>) {
        self.sink = Some(sink);
    }

    pub fn take_sink(&mut self) -> Option<Box<dyn EventSink>> {
        self.sink.take()
    }

    /// Hand the in-flight requests to the sink and detach it.
    pub fn finish_sink(&mut self) -> Result<()> {
        let Some(mut sink) = self.sink.take() else { return Ok(()) };
        let in_flight = self.in_flight();
        sink.finish(&in_flight)
    }

    pub fn restriction(&self) -> &Restriction {
        &self.restriction
    }

    pub fn set_restriction(&mut self, r: Restriction) {
        self.restriction = r;
    }

    /// Invariant violations seen so far (only collected with checks enabled).
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn drain_samples(&mut self) -> Vec<Sample> {
        std::mem::take(&mut self.samples)
    }

    /// Outstanding requests of `core`.
    pub fn outstanding(&self, core: u32) -> u32 {
        self.cores[core as usize].outstanding
    }

    /// Requests still inside the uncore (IRQ or ToR), by ascending id.
    pub fn in_flight(&self) -> Vec<&Request> {
        let mut v: Vec<&Request> = self.requests.iter().map(|(_, r)| r).collect();
        v.sort_by_key(|r| r.id);
        v
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut chas = self.chas.clone();
        for (c, q) in chas.iter_mut().zip(&self.irqs) {
            c.irq_len = q.len() as u32;
        }
        Snapshot {
            cycle: self.now,
            chas,
            txns: self.txns,
            workload_completed: self.workload_completed.clone(),
            core_issued: self.cores.iter().map(|c| c.issued).collect(),
            core_completed_bytes: self.cores.iter().map(|c| c.completed_bytes).collect(),
            core_stalled: self.cores.iter().map(|c| c.stalled_cycles).collect(),
            issued: self.issued,
            completed: self.completed,
        }
    }

    /// Advance exactly `n` cycles.
    pub fn step(&mut self, n: u64) {
        for _ in 0..n {
            self.cycle();
        }
    }

    pub fn run_until(&mut self, cycle: u64) {
        while self.now < cycle {
            self.cycle();
        }
    }

    fn cycle(&mut self) {
        self.device_events();
        self.retire();
        self.admit();
        self.issue();
        self.integrate();
        if self.check {
            self.check_invariants();
        }
        self.now += 1;
    }

    fn push_event(&mut self, at: u64, ev: Ev) {
        self.seq += 1;
        self.events.push(Reverse((at, self.seq, ev)));
    }

    fn dev_index(&self, tier: Tier, socket: u32, local: u32) -> usize {
        let p = &self.platform;
        let ddr_total = p.sockets as usize * p.ddr_devices.len();
        match tier {
            Tier::Ddr => socket as usize * p.ddr_devices.len() + local as usize,
            Tier::Cxl => ddr_total + socket as usize * p.cxl_devices.len() + local as usize,
        }
    }

    fn service_time(&mut self, mean: u64) -> u64 {
        if !self.jitter {
            return mean;
        }
        let d = Exp::new(1.0 / mean as f64).expect("positive service time");
        (d.sample(&mut self.rng).round() as u64).max(1)
    }

    fn begin_service(&mut self, dev: usize, txn: Txn) {
        let spec = &self.devices[dev].spec;
        let (mean, overhead) = (spec.service(txn.class), spec.protocol_overhead);
        let svc = self.service_time(mean);
        let cross = if self.requests[txn.req].remote {
            self.platform.cross_socket_latency
        } else {
            0
        };
        let r = &mut self.requests[txn.req];
        r.t_dispatch.get_or_insert(self.now);
        self.push_event(self.now + svc, Ev::SlotFree { dev });
        self.push_event(
            self.now + svc + overhead + cross,
            Ev::TxnDone { req: txn.req, class: txn.class },
        );
    }

    fn device_events(&mut self) {
        while let Some(&Reverse((at, _, ev))) = self.events.peek() {
            if at > self.now {
                break;
            }
            debug_assert_eq!(at, self.now, "event scheduled in the past");
            self.events.pop();
            match ev {
                Ev::SlotFree { dev } => {
                    let (started, promoted) = self.devices[dev].release();
                    if let Some(t) = started {
                        self.begin_service(dev, t);
                    }
                    if let Some(t) = promoted {
                        self.requests[t.req].t_dispatch.get_or_insert(self.now);
                    }
                }
                Ev::TxnDone { req, class } => {
                    let tier = self.requests[req].tier;
                    self.txns[tier.index()][class as usize] += 1;
                    let r = &mut self.requests[req];
                    r.pending_txns -= 1;
                    if r.pending_txns == 0 {
                        self.done.push(req);
                    }
                }
                Ev::Done { req } => self.done.push(req),
            }
        }
    }

    fn retire(&mut self) {
        if self.done.is_empty() {
            return;
        }
        let mut done = std::mem::take(&mut self.done);
        done.sort_by_key(|&k| self.requests[k].id);
        let line = self.platform.cacheline_bytes;
        for key in done.drain(..) {
            let mut r = self.requests.remove(key);
            r.t_complete = Some(self.now);
            self.chas[r.cha as usize].live[r.class.index()] -= 1;
            self.completed += 1;
            let core = &mut self.cores[r.core as usize];
            core.outstanding -= 1;
            core.completed += 1;
            core.completed_bytes += line;
            let (wi, thread) = (r.workload as usize, r.thread as usize);
            self.workload_completed[wi] += 1;
            let latency = self.now - r.t_issued;
            self.workloads[wi].on_complete(thread, latency);
            if !r.llc_hit && llc_eligible(r.kind) {
                let home = r.cha / self.platform.chas_per_socket;
                if let Some(llc) = self.llc.as_mut() {
                    llc[home as usize].fill(wi);
                }
            }
            let cd = &mut self.sample_countdown[r.core as usize];
            *cd -= 1;
            if *cd == 0 {
                *cd = self.sample_n;
                self.samples.push(Sample { core: r.core, tier: r.tier, addr: r.addr });
            }
            if let Some(sink) = self.sink.as_mut() {
                sink.record(&r);
            }
        }
        self.done = done;
    }

    fn admit(&mut self) {
        let cap = self.platform.tor_capacity_per_cha;
        let width = self.platform.admit_width;
        for cha in 0..self.irqs.len() {
            let mut admitted = 0;
            while admitted < width && self.chas[cha].live_total() < cap {
                let Some(key) = self.irqs[cha].pop_front() else { break };
                admitted += 1;
                self.admit_one(cha, key);
            }
        }
    }

    fn admit_one(&mut self, cha: usize, key: usize) {
        let now = self.now;
        let p = &self.platform;
        let (hit_svc, coh_svc, cross) = (p.llc_hit_service, p.coherence_service, p.cross_socket_latency);
        let chas_per_socket = p.chas_per_socket;
        let r = &mut self.requests[key];
        if self.check {
            let t_irq = r.t_irq.unwrap_or(0);
            if t_irq < self.last_admit_irq[cha] && self.violations.len() < MAX_VIOLATIONS {
                self.violations.push(format!("cycle {now}: cha {cha} admitted out of IRQ order"));
            }
            self.last_admit_irq[cha] = t_irq;
        }
        r.t_tor = Some(now);
        let extra = if r.remote { cross } else { 0 };
        let home = r.cha / chas_per_socket;
        let fixed = if r.kind == RequestKind::Coherence {
            Some(coh_svc)
        } else if llc_eligible(r.kind)
            && self
                .llc
                .as_mut()
                .is_some_and(|l| l[home as usize].lookup(r.workload as usize))
        {
            r.llc_hit = true;
            Some(hit_svc)
        } else {
            None
        };
        if let Some(svc) = fixed {
            r.class = TorClass::Other;
            r.t_dispatch = Some(now);
            self.chas[cha].inserts[TorClass::Other.index()] += 1;
            self.chas[cha].live[TorClass::Other.index()] += 1;
            self.push_event(now + svc + extra, Ev::Done { req: key });
            return;
        }
        let class = TorClass::of_tier(r.tier);
        r.class = class;
        let txns = decompose(r.kind);
        r.pending_txns = txns.len() as u8;
        let (tier, addr) = (r.tier, r.addr);
        self.chas[cha].inserts[class.index()] += 1;
        self.chas[cha].live[class.index()] += 1;
        let local = self.platform.device_index(tier, home, addr);
        let dev = self.dev_index(tier, home, local);
        for &c in txns {
            let txn = Txn { req: key, class: c };
            match self.devices[dev].offer(txn) {
                Accept::Started => self.begin_service(dev, txn),
                Accept::Queued => {
                    self.requests[key].t_dispatch.get_or_insert(now);
                }
                Accept::Pending => {}
            }
        }
    }

    fn issue(&mut self) {
        let now = self.now;
        let mut order = std::mem::take(&mut self.order);
        order.clear();
        order.extend(self.active_cores.iter().map(|&c| {
            let age = self.cores[c as usize].held.map_or(u64::MAX, |h| h.t_issued);
            (age, c)
        }));
        order.sort_unstable();
        for &(_, c) in &order {
            self.issue_core(c, now);
        }
        self.order = order;
    }

    fn issue_core(&mut self, c: u32, now: u64) {
        let ci = c as usize;
        let (wi, thread) = self.cores[ci].binding.expect("active core is bound");
        if !self.restriction.active(c, now) {
            return;
        }
        let held = match self.cores[ci].held {
            Some(h) => h,
            None => {
                let core = &self.cores[ci];
                let gap = self.restriction.gap(c).unwrap_or(1).max(core.issue_interval);
                let paced = core.last_accept.is_none_or(|t| now >= t + gap);
                if core.outstanding >= core.mlp || !paced || !self.workloads[wi].can_generate(thread, now) {
                    return;
                }
                let (addr, kind) = self.workloads[wi].generate(thread, now);
                Held { addr, kind, t_issued: now + 1 }
            }
        };
        let p = &self.platform;
        let tier = p.address_to_tier(held.addr).expect("workload addresses are mapped");
        let home = p.home_socket(held.addr).expect("workload addresses are mapped");
        let cha = home * p.chas_per_socket + p.hash_to_cha(held.addr);
        if self.irqs[cha as usize].len() >= p.irq_capacity_per_cha as usize {
            let core = &mut self.cores[ci];
            core.held = Some(held);
            core.stalled_cycles += 1;
            return;
        }
        let remote = home != self.cores[ci].socket;
        let key = self.requests.insert(Request {
            id: self.next_id,
            core: c,
            workload: wi as u32,
            thread: thread as u32,
            kind: held.kind,
            addr: held.addr,
            tier,
            cha,
            class: TorClass::Other,
            remote,
            llc_hit: false,
            t_issued: held.t_issued,
            t_irq: Some(now + 1),
            t_tor: None,
            t_dispatch: None,
            t_complete: None,
            pending_txns: 0,
        });
        self.next_id += 1;
        self.irqs[cha as usize].push_back(key);
        self.issued += 1;
        let core = &mut self.cores[ci];
        core.held = None;
        core.outstanding += 1;
        core.issued += 1;
        core.last_accept = Some(now);
        self.workloads[wi].on_accept(thread);
    }

    fn integrate(&mut self) {
        for c in &mut self.chas {
            for i in 0..3 {
                c.occupancy[i] += c.live[i] as u64;
            }
        }
        for d in &mut self.devices {
            d.busy_integral += d.busy as u64;
        }
    }

    fn check_invariants(&mut self) {
        let mut bad = Vec::new();
        let irq: usize = self.irqs.iter().map(|q| q.len()).sum();
        let tor: u64 = self.chas.iter().map(|c| c.live_total() as u64).sum();
        if self.issued != self.completed + irq as u64 + tor {
            bad.push(format!(
                "conservation: issued {} != completed {} + irq {} + tor {}",
                self.issued, self.completed, irq, tor
            ));
        }
        if self.requests.len() as u64 != irq as u64 + tor {
            bad.push("request table size differs from IRQ + ToR population".into());
        }
        for (i, c) in self.chas.iter().enumerate() {
            if c.live_total() > self.platform.tor_capacity_per_cha {
                bad.push(format!("cha {i}: ToR over capacity"));
            }
            if self.irqs[i].len() > self.platform.irq_capacity_per_cha as usize {
                bad.push(format!("cha {i}: IRQ over capacity"));
            }
        }
        for (i, d) in self.devices.iter().enumerate() {
            if !d.work_conserving() {
                bad.push(format!("device {i}: idle slot while work waits"));
            }
            if d.queue.len() > d.spec.device_queue_capacity as usize {
                bad.push(format!("device {i}: queue over capacity"));
            }
        }
        for &c in &self.active_cores {
            let core = &self.cores[c as usize];
            if core.outstanding > core.mlp {
                bad.push(format!("core {c}: outstanding above MLP"));
            }
        }
        for b in bad {
            if self.violations.len() < MAX_VIOLATIONS {
                self.violations.push(format!("cycle {}: {b}", self.now));
            }
        }
    }

    /// Total busy slot-cycles per device, DDR devices first.
    pub fn device_busy_integrals(&self) -> Vec<u64> {
        self.devices.iter().map(|d| d.busy_integral).collect()
    }

    /// Transactions inside devices (in service, queued or pending).
    pub fn device_in_flight(&self) -> usize {
        self.devices.iter().map(|d| d.in_flight()).sum()
    }
}

fn llc_eligible(kind: RequestKind) -> bool {
    matches!(kind, RequestKind::Load | RequestKind::Store)
}
