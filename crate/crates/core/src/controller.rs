//! Closed-loop memory request control.
//!
//! Every sample window the controller splits the mean ToR residence into
//! its DDR and CXL parts,
//!
//! ```text
//! T_avg = occupancy / inserts = α·T_ddr + (1 − α)·T_cxl
//! ```
//!
//! with `α` the DDR share of memory inserts and `T_ddr` a calibrated
//! constant. When `T_cxl` exceeds its target and is still growing, the
//! cores found issuing CXL traffic are confined to the most restrictive
//! level at once; sustained under-target windows promote them one level at
//! a time.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{Restriction, Sample, Snapshot, TorClass};
use crate::error::{Error, Result};
use crate::platform::Tier;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    #[default]
    Off,
    On,
    /// Rate caps only, no core confinement.
    Mba,
}

impl ControllerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerMode::Off => "off",
            ControllerMode::On => "on",
            ControllerMode::Mba => "mba",
        }
    }
}

/// A cycle count, or `"auto"` to derive it from the platform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    #[default]
    #[serde(with = "auto_tag")]
    Auto,
    Value(f64),
}

mod auto_tag {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("expected \"auto\" or a number, got {s:?}")))
        }
    }
}

fn default_period() -> u64 {
    20_000
}
fn default_hysteresis() -> u32 {
    2
}
fn default_floor() -> u64 {
    1024
}
fn default_sampling() -> u32 {
    64
}
fn default_traffic() -> f64 {
    10e6
}
fn default_levels() -> [u32; 3] {
    [8, 4, 1]
}
fn default_quantum() -> u64 {
    1000
}
fn default_budget() -> u32 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default)]
    pub mode: ControllerMode,
    #[serde(default = "default_period")]
    pub sample_period_cycles: u64,
    /// CXL read latency target; `auto` is three times the unloaded CXL round trip.
    #[serde(default)]
    pub read_threshold: AutoOr,
    /// DDR ToR residence used to split the mix; `auto` runs a calibration probe.
    #[serde(default)]
    pub t_ddr_ref: AutoOr,
    #[serde(default = "default_hysteresis")]
    pub hysteresis_windows: u32,
    /// Largest issue gap (cycles per request) a rate cap may reach.
    #[serde(default = "default_floor")]
    pub rate_cap_floor: u64,
    #[serde(default = "default_sampling")]
    pub sampling_rate_n: u32,
    /// Bytes per second a core must move to be considered for attribution.
    #[serde(default = "default_traffic")]
    pub high_traffic_threshold: f64,
    /// Cores that may run at once at levels 1, 2 and 3.
    #[serde(default = "default_levels")]
    pub level_cores: [u32; 3],
    #[serde(default = "default_quantum")]
    pub quantum_cycles: u64,
    /// Windows allowed to settle after a phase change.
    #[serde(default = "default_budget")]
    pub stabilization_budget: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            mode: ControllerMode::Off,
            sample_period_cycles: default_period(),
            read_threshold: AutoOr::Auto,
            t_ddr_ref: AutoOr::Auto,
            hysteresis_windows: default_hysteresis(),
            rate_cap_floor: default_floor(),
            sampling_rate_n: default_sampling(),
            high_traffic_threshold: default_traffic(),
            level_cores: default_levels(),
            quantum_cycles: default_quantum(),
            stabilization_budget: default_budget(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let at = |f: &str| format!("controller.{f}");
        if self.sample_period_cycles == 0 {
            return Err(Error::config(at("sample_period_cycles"), "must be > 0"));
        }
        if self.hysteresis_windows == 0 {
            return Err(Error::config(at("hysteresis_windows"), "must be >= 1"));
        }
        if self.rate_cap_floor == 0 {
            return Err(Error::config(at("rate_cap_floor"), "must be > 0"));
        }
        if self.sampling_rate_n == 0 {
            return Err(Error::config(at("sampling_rate_n"), "must be >= 1"));
        }
        if self.quantum_cycles == 0 {
            return Err(Error::config(at("quantum_cycles"), "must be > 0"));
        }
        let l = self.level_cores;
        if l.contains(&0) || l[0] < l[1] || l[1] < l[2] {
            return Err(Error::config(at("level_cores"), "must be positive and non-increasing"));
        }
        for (f, v) in [("read_threshold", self.read_threshold), ("t_ddr_ref", self.t_ddr_ref)] {
            if let AutoOr::Value(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::config(at(f), "must be a positive number or \"auto\""));
                }
            }
        }
        Ok(())
    }
}

/// Restriction level; larger is more restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Unrestricted,
    L1,
    L2,
    L3,
}

impl Level {
    pub fn tighter(self) -> Self {
        match self {
            Level::Unrestricted => Level::L1,
            Level::L1 => Level::L2,
            _ => Level::L3,
        }
    }

    pub fn looser(self) -> Self {
        match self {
            Level::L3 => Level::L2,
            Level::L2 => Level::L1,
            _ => Level::Unrestricted,
        }
    }

    pub fn slots(self, level_cores: [u32; 3]) -> Option<usize> {
        match self {
            Level::Unrestricted => None,
            Level::L1 => Some(level_cores[0] as usize),
            Level::L2 => Some(level_cores[1] as usize),
            Level::L3 => Some(level_cores[2] as usize),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Unrestricted => "unrestricted",
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::L3 => "L3",
        })
    }
}

/// Memory-class ToR deltas over one window. Hits and coherence traffic are
/// excluded from `tor_inserts` and `tor_occupancy_integral`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WindowStats {
    pub window_cycles: u64,
    pub tor_inserts: u64,
    pub tor_occupancy_integral: u64,
    pub ddr_inserts: u64,
    pub cxl_inserts: u64,
    pub cxl_read_fraction: f64,
}

pub fn sample_window(a: &Snapshot, b: &Snapshot) -> WindowStats {
    let sum = |s: &Snapshot, f: fn(&crate::engine::ChaCounters) -> u64| -> u64 { s.chas.iter().map(f).sum() };
    let ddr = sum(b, |c| c.inserts[TorClass::Ddr.index()]) - sum(a, |c| c.inserts[TorClass::Ddr.index()]);
    let cxl = sum(b, |c| c.inserts[TorClass::Cxl.index()]) - sum(a, |c| c.inserts[TorClass::Cxl.index()]);
    let occ = |s: &Snapshot| {
        s.chas
            .iter()
            .map(|c| c.occupancy[TorClass::Ddr.index()] + c.occupancy[TorClass::Cxl.index()])
            .sum::<u64>()
    };
    let ci = Tier::Cxl.index();
    let reads = b.txns[ci][0] - a.txns[ci][0];
    let writes = b.txns[ci][1] - a.txns[ci][1];
    WindowStats {
        window_cycles: b.cycle - a.cycle,
        tor_inserts: ddr + cxl,
        tor_occupancy_integral: occ(b) - occ(a),
        ddr_inserts: ddr,
        cxl_inserts: cxl,
        cxl_read_fraction: if reads + writes == 0 { 1.0 } else { reads as f64 / (reads + writes) as f64 },
    }
}

impl WindowStats {
    pub fn t_avg(&self) -> Result<f64> {
        crate::metrics::avg_tor_latency(self.tor_occupancy_integral, self.tor_inserts)
    }
}

pub fn estimate_alpha(stats: &WindowStats) -> Result<f64> {
    if stats.ddr_inserts + stats.cxl_inserts == 0 {
        return Err(Error::NoMeasurement("no memory inserts in window"));
    }
    Ok(stats.ddr_inserts as f64 / (stats.ddr_inserts + stats.cxl_inserts) as f64)
}

/// Solution of the mix equation for the CXL term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcxlEstimate {
    pub t_cxl: f64,
    /// The raw solution was negative: `t_ddr_ref` is too large for this window.
    pub clamped: bool,
}

pub fn solve_tcxl(t_avg: f64, alpha: f64, t_ddr_ref: f64) -> Result<TcxlEstimate> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::NoMeasurement("no CXL share in window"));
    }
    let t = (t_avg - alpha * t_ddr_ref) / (1.0 - alpha);
    Ok(if t < 0.0 {
        TcxlEstimate { t_cxl: 0.0, clamped: true }
    } else {
        TcxlEstimate { t_cxl: t, clamped: false }
    })
}

/// Read/write-weighted latency target; writes get twice the read budget.
pub fn target_cxl_latency(cxl_read_fraction: f64, read_threshold: f64) -> f64 {
    cxl_read_fraction * read_threshold + (1.0 - cxl_read_fraction) * 2.0 * read_threshold
}

/// Over target and still growing relative to the previous valid window.
pub fn detect_backlog(t_cxl: f64, target: f64, previous: Option<f64>) -> bool {
    t_cxl > target && previous.is_some_and(|p| t_cxl > p)
}

/// Result of one attribution pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Attribution {
    /// High-traffic cores with at least one CXL sample.
    pub cxl: BTreeSet<u32>,
    /// High-traffic cores whose samples were all DDR.
    pub ddr_only: BTreeSet<u32>,
}

/// Classify high-traffic cores by their sampled addresses.
///
/// `core_bytes` is bytes moved per core over the window; cores below
/// `threshold_bytes` are ignored before their samples are looked at.
pub fn attribute_cxl_cores(samples: &[Sample], core_bytes: &[u64], threshold_bytes: f64) -> Attribution {
    let hot = |c: u32| core_bytes.get(c as usize).is_some_and(|&b| b as f64 >= threshold_bytes);
    let mut out = Attribution::default();
    for s in samples.iter().filter(|s| hot(s.core)) {
        if s.tier == Tier::Cxl {
            out.cxl.insert(s.core);
        }
    }
    for s in samples.iter().filter(|s| hot(s.core)) {
        if !out.cxl.contains(&s.core) {
            out.ddr_only.insert(s.core);
        }
    }
    out
}

/// One row of the decision log.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub window_id: usize,
    pub alpha: Option<f64>,
    pub t_avg: Option<f64>,
    pub t_cxl: Option<f64>,
    pub target: Option<f64>,
    /// Level in force for the next window ("mba" in rate-only mode, "off" when disabled).
    pub level: String,
    /// Requests per cycle allowed per restricted core; `None` when uncapped.
    pub rate_cap: Option<f64>,
    pub restricted_cores: usize,
    pub backlog: bool,
    pub clamped: bool,
}

/// Per-window inputs gathered by the runner.
pub struct WindowInput<'a> {
    pub stats: WindowStats,
    pub samples: &'a [Sample],
    /// Bytes retired per core in the window.
    pub core_bytes: &'a [u64],
    pub clock_hz: f64,
    pub line: u64,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    read_threshold: f64,
    t_ddr_ref: f64,
    level: Level,
    /// Least restrictive level known to backlog; promotion stops short of it.
    ceiling: Option<Level>,
    rate_gap: Option<u64>,
    under: u32,
    prev_t_cxl: Option<f64>,
    cxl_cores: BTreeSet<u32>,
    window: usize,
    log: Vec<Decision>,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, read_threshold: f64, t_ddr_ref: f64) -> Self {
        Controller {
            cfg,
            read_threshold,
            t_ddr_ref,
            level: Level::Unrestricted,
            ceiling: None,
            rate_gap: None,
            under: 0,
            prev_t_cxl: None,
            cxl_cores: BTreeSet::new(),
            window: 0,
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn rate_gap(&self) -> Option<u64> {
        self.rate_gap
    }

    pub fn read_threshold(&self) -> f64 {
        self.read_threshold
    }

    pub fn t_ddr_ref(&self) -> f64 {
        self.t_ddr_ref
    }

    pub fn cxl_cores(&self) -> &BTreeSet<u32> {
        &self.cxl_cores
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.log
    }

    /// Whether the state is fully relaxed.
    pub fn is_unrestricted(&self) -> bool {
        self.level == Level::Unrestricted && self.rate_gap.is_none()
    }

    /// Issue gap that halves the restricted cores' measured rate.
    fn halved_gap(&self, input: &WindowInput) -> u64 {
        let next = match self.rate_gap {
            Some(g) => g * 2,
            None => {
                let req: u64 = self
                    .cxl_cores
                    .iter()
                    .map(|&c| input.core_bytes.get(c as usize).copied().unwrap_or(0) / input.line)
                    .sum();
                let active = match self.level.slots(self.cfg.level_cores) {
                    Some(k) => k.min(self.cxl_cores.len()).max(1) as u64,
                    None => self.cxl_cores.len().max(1) as u64,
                };
                // Per active core: cycles per request, doubled.
                let per_core = (input.stats.window_cycles * active).div_ceil(req.max(1));
                per_core.max(1) * 2
            }
        };
        next.min(self.cfg.rate_cap_floor)
    }

    /// Consume one window and return the restriction for the next.
    pub fn on_window(&mut self, input: &WindowInput) -> Restriction {
        let id = self.window;
        self.window += 1;
        if self.cfg.mode == ControllerMode::Off {
            self.log.push(Decision {
                window_id: id,
                alpha: estimate_alpha(&input.stats).ok(),
                t_avg: input.stats.t_avg().ok(),
                t_cxl: None,
                target: None,
                level: "off".into(),
                rate_cap: None,
                restricted_cores: 0,
                backlog: false,
                clamped: false,
            });
            return Restriction::none();
        }

        let threshold = self.cfg.high_traffic_threshold * input.stats.window_cycles as f64 / input.clock_hz;
        let attr = attribute_cxl_cores(input.samples, input.core_bytes, threshold);
        // Cores new to the set ran unrestricted this window, so a backlog
        // now says nothing about the level in force.
        let joined = attr.cxl.iter().any(|c| !self.cxl_cores.contains(c));
        self.cxl_cores.retain(|c| !attr.ddr_only.contains(c));
        self.cxl_cores.extend(attr.cxl.iter().copied());

        let stats = &input.stats;
        let alpha = estimate_alpha(stats).ok();
        let t_avg = stats.t_avg().ok();
        let mut t_cxl = None;
        let mut target = None;
        let mut backlog = false;
        let mut clamped = false;

        if stats.cxl_inserts == 0 {
            // Nothing on the slow tier: relax toward unrestricted.
            self.ceiling = None;
            self.prev_t_cxl = None;
            self.relax();
        } else {
            let est = solve_tcxl(t_avg.unwrap(), alpha.unwrap(), self.t_ddr_ref).expect("alpha < 1 with CXL inserts");
            clamped = est.clamped;
            let tgt = target_cxl_latency(stats.cxl_read_fraction, self.read_threshold);
            backlog = detect_backlog(est.t_cxl, tgt, self.prev_t_cxl);
            let over = est.t_cxl > tgt;
            match self.cfg.mode {
                ControllerMode::On => self.step_levels(over, backlog, joined, input),
                ControllerMode::Mba => self.step_rate(over, backlog, input),
                ControllerMode::Off => unreachable!(),
            }
            self.prev_t_cxl = Some(est.t_cxl);
            t_cxl = Some(est.t_cxl);
            target = Some(tgt);
        }

        let restriction = self.restriction();
        self.log.push(Decision {
            window_id: id,
            alpha,
            t_avg,
            t_cxl,
            target,
            level: match self.cfg.mode {
                ControllerMode::Mba => "mba".into(),
                _ => self.level.to_string(),
            },
            rate_cap: self.rate_gap.map(|g| 1.0 / g as f64),
            restricted_cores: restriction.cores.len(),
            backlog,
            clamped,
        });
        restriction
    }

    fn relax(&mut self) {
        self.under += 1;
        if self.under < self.cfg.hysteresis_windows {
            return;
        }
        self.under = 0;
        match self.cfg.mode {
            ControllerMode::Mba => {
                self.rate_gap = self.rate_gap.map(|g| g / 2).filter(|&g| g > 1);
            }
            _ => {
                let next = self.level.looser();
                let allowed = self.level != Level::Unrestricted && self.ceiling.is_none_or(|c| next > c);
                if allowed {
                    self.level = next;
                }
                self.rate_gap = None;
            }
        }
    }

    fn step_levels(&mut self, over: bool, backlog: bool, joined: bool, input: &WindowInput) {
        if self.level == Level::L3 && over {
            self.under = 0;
            self.rate_gap = Some(self.halved_gap(input));
        } else if backlog {
            self.under = 0;
            if !joined {
                self.ceiling = Some(self.ceiling.map_or(self.level, |c| c.max(self.level)));
            }
            self.level = Level::L3;
            self.rate_gap = None;
        } else if over {
            self.under = 0;
        } else {
            self.relax();
        }
    }

    fn step_rate(&mut self, over: bool, backlog: bool, input: &WindowInput) {
        if backlog || (over && self.rate_gap.is_some()) {
            self.under = 0;
            self.rate_gap = Some(self.halved_gap(input));
        } else if over {
            self.under = 0;
        } else {
            self.relax();
        }
    }

    pub fn restriction(&self) -> Restriction {
        let slots = match self.cfg.mode {
            ControllerMode::On => self.level.slots(self.cfg.level_cores),
            _ => None,
        };
        if slots.is_none() && self.rate_gap.is_none() {
            return Restriction::none();
        }
        Restriction {
            cores: self.cxl_cores.clone(),
            slots,
            min_issue_gap: self.rate_gap,
            quantum: self.cfg.quantum_cycles,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(ddr: u64, cxl: u64, occ: u64) -> WindowStats {
        WindowStats {
            window_cycles: 20_000,
            tor_inserts: ddr + cxl,
            tor_occupancy_integral: occ,
            ddr_inserts: ddr,
            cxl_inserts: cxl,
            cxl_read_fraction: 1.0,
        }
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(estimate_alpha(&stats(300, 100, 1)).unwrap(), 0.75);
        assert_eq!(estimate_alpha(&stats(0, 7, 1)).unwrap(), 0.0);
        assert_eq!(estimate_alpha(&stats(9, 0, 1)).unwrap(), 1.0);
        assert!(estimate_alpha(&stats(0, 0, 0)).is_err());
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_tcxl(500.0, 0.5, 100.0).unwrap().t_cxl, 900.0);
        assert!(solve_tcxl(100.0, 1.0, 100.0).is_err());
        let c = solve_tcxl(50.0, 0.9, 100.0).unwrap();
        assert!(c.clamped);
        assert_eq!(c.t_cxl, 0.0);
    }

    #[test]
    fn target_examples() {
        assert_eq!(target_cxl_latency(1.0, 660.0), 660.0);
        assert_eq!(target_cxl_latency(0.0, 660.0), 1320.0);
        assert_eq!(target_cxl_latency(0.5, 660.0), 990.0);
    }

    #[test]
    fn detection_rule_table() {
        let t = 100.0;
        assert!(!detect_backlog(0.9 * t, t, Some(0.8 * t)));
        assert!(detect_backlog(1.5 * t, t, Some(1.2 * t)));
        assert!(!detect_backlog(1.2 * t, t, Some(1.5 * t)));
        assert!(!detect_backlog(1.5 * t, t, None));
        assert!(!detect_backlog(1.5 * t, t, Some(1.5 * t)));
    }

    fn sample(core: u32, tier: Tier) -> Sample {
        Sample { core, tier, addr: 0 }
    }

    #[test]
    fn attribution_filters_and_classifies() {
        let samples = [
            sample(0, Tier::Ddr),
            sample(1, Tier::Cxl),
            sample(1, Tier::Ddr),
            sample(2, Tier::Cxl),
        ];
        let bytes = [1000, 1000, 10];
        let a = attribute_cxl_cores(&samples, &bytes, 100.0);
        assert_eq!(a.cxl, [1].into());
        assert_eq!(a.ddr_only, [0].into());
    }

    fn input<'a>(s: WindowStats, samples: &'a [Sample], bytes: &'a [u64]) -> WindowInput<'a> {
        WindowInput { stats: s, samples, core_bytes: bytes, clock_hz: 1e9, line: 64 }
    }

    fn ctl(mode: ControllerMode) -> Controller {
        Controller::new(ControllerConfig { mode, ..Default::default() }, 660.0, 100.0)
    }

    // α = 0.5, T_ddr = 100: T_cxl = 2·T_avg − 100.
    fn mixed(t_cxl: f64) -> WindowStats {
        let n = 1000;
        let occ = ((100.0 + t_cxl) / 2.0 * (2 * n) as f64) as u64;
        stats(n, n, occ)
    }

    #[test]
    fn demote_to_l3_then_promote_stepwise() {
        let mut c = ctl(ControllerMode::On);
        let samples = [sample(5, Tier::Cxl)];
        let bytes = vec![1 << 20; 8];
        c.on_window(&input(mixed(800.0), &samples, &bytes));
        assert_eq!(c.level(), Level::Unrestricted);
        let r = c.on_window(&input(mixed(1200.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L3);
        assert_eq!(r.slots, Some(1));
        assert_eq!(r.cores, [5].into());
        c.on_window(&input(mixed(300.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L3);
        c.on_window(&input(mixed(300.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L2);
        c.on_window(&input(mixed(300.0), &samples, &bytes));
        c.on_window(&input(mixed(300.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L1);
        // The unrestricted level backlogged before, so promotion stops here.
        c.on_window(&input(mixed(300.0), &samples, &bytes));
        c.on_window(&input(mixed(300.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L1);
    }

    #[test]
    fn l3_over_target_halves_rate_to_floor() {
        let mut c = ctl(ControllerMode::On);
        let samples = [sample(0, Tier::Cxl)];
        let bytes = vec![64 * 400];
        c.on_window(&input(mixed(800.0), &samples, &bytes));
        c.on_window(&input(mixed(900.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L3);
        c.on_window(&input(mixed(900.0), &samples, &bytes));
        // 400 requests from one core over 20 000 cycles: gap 50, halved rate → 100.
        assert_eq!(c.rate_gap(), Some(100));
        let mut prev = 100;
        for _ in 0..10 {
            c.on_window(&input(mixed(900.0), &samples, &bytes));
            let g = c.rate_gap().unwrap();
            assert!(g >= prev && g <= 1024);
            prev = g;
        }
        assert_eq!(prev, 1024);
    }

    #[test]
    fn zero_cxl_windows_recover_fully() {
        let mut c = ctl(ControllerMode::On);
        let samples = [sample(3, Tier::Cxl)];
        let bytes = vec![1 << 20; 4];
        c.on_window(&input(mixed(800.0), &samples, &bytes));
        c.on_window(&input(mixed(1000.0), &samples, &bytes));
        assert_eq!(c.level(), Level::L3);
        let mut n = 0;
        while !c.is_unrestricted() {
            c.on_window(&input(stats(500, 0, 50_000), &[], &bytes));
            n += 1;
            assert!(n <= 6);
        }
        assert_eq!(n, 6);
        assert!(c.restriction().is_none());
    }

    #[test]
    fn ddr_only_cores_leave_the_set() {
        let mut c = ctl(ControllerMode::On);
        let bytes = vec![1 << 20; 4];
        c.on_window(&input(mixed(800.0), &[sample(1, Tier::Cxl), sample(2, Tier::Cxl)], &bytes));
        c.on_window(&input(mixed(900.0), &[sample(2, Tier::Ddr)], &bytes));
        assert_eq!(c.cxl_cores(), &[1].into());
    }

    #[test]
    fn mba_mode_only_caps_rate() {
        let mut c = ctl(ControllerMode::Mba);
        let samples = [sample(0, Tier::Cxl)];
        let bytes = vec![64 * 1000];
        c.on_window(&input(mixed(800.0), &samples, &bytes));
        let r = c.on_window(&input(mixed(900.0), &samples, &bytes));
        assert_eq!(r.slots, None);
        assert_eq!(r.min_issue_gap, Some(40));
        for _ in 0..2 {
            c.on_window(&input(mixed(200.0), &samples, &bytes));
        }
        assert_eq!(c.rate_gap(), Some(20));
    }

    #[test]
    fn off_mode_never_restricts() {
        let mut c = ctl(ControllerMode::Off);
        for t in [800.0, 2000.0, 5000.0] {
            assert!(c.on_window(&input(mixed(t), &[sample(0, Tier::Cxl)], &[1 << 20])).is_none());
        }
        assert_eq!(c.decisions().len(), 3);
    }

    #[test]
    fn config_json() {
        let c: ControllerConfig =
            serde_json::from_str(r#"{"mode":"on","read_threshold":"auto","t_ddr_ref":100}"#).unwrap();
        assert_eq!(c.mode, ControllerMode::On);
        assert_eq!(c.read_threshold, AutoOr::Auto);
        assert_eq!(c.t_ddr_ref, AutoOr::Value(100.0));
        let back: ControllerConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ControllerConfig>(r#"{"read_threshold":"fast"}"#).is_err());
        let mut bad = c.clone();
        bad.level_cores = [1, 4, 8];
        assert!(bad.validate().is_err());
    }
}
