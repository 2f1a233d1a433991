//! Static hardware model: sockets, CHAs, queue capacities and the tiered
//! memory devices, plus the pure routing functions that map a physical
//! address onto a tier, a home socket, a CHA and a device.
//!
//! Device lists are per socket: every socket owns its own copy of
//! `ddr_devices` and `cxl_devices`, and each physical range is split into
//! `sockets` equal contiguous chunks, chunk `s` being homed on socket `s`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Software interleave / CXL device interleave granularity.
pub const PAGE_BYTES: u64 = 4096;

const GIB: u64 = 1 << 30;
const TIB: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Ddr,
    Cxl,
}

impl Tier {
    pub const ALL: [Tier; 2] = [Tier::Ddr, Tier::Cxl];

    pub fn index(self) -> usize {
        match self {
            Tier::Ddr => 0,
            Tier::Cxl => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Ddr => "ddr",
            Tier::Cxl => "cxl",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Application-visible request kinds as they enter the uncore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Load,
    Store,
    NtStore,
    Coherence,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Load => "load",
            RequestKind::Store => "store",
            RequestKind::NtStore => "nt_store",
            RequestKind::Coherence => "coherence",
        }
    }
}

/// Device-level transaction class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TxnClass {
    Read,
    Write,
}

/// Device transactions generated by one request on the same cacheline.
///
/// Stores are read-modify-write and therefore emit one read and one write;
/// non-temporal stores only write. Coherence requests never reach a device.
pub fn decompose(kind: RequestKind) -> &'static [TxnClass] {
    match kind {
        RequestKind::Load => &[TxnClass::Read],
        RequestKind::Store => &[TxnClass::Read, TxnClass::Write],
        RequestKind::NtStore => &[TxnClass::Write],
        RequestKind::Coherence => &[],
    }
}

/// Half-open physical byte interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddrRange {
    pub start: u64,
    pub end: u64,
}

impl AddrRange {
    pub fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.start && addr < self.end
    }

    pub fn overlaps(&self, other: &AddrRange) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    /// Concurrent in-service slots (bank/channel-level parallelism).
    pub parallelism: u32,
    pub read_service: u64,
    pub write_service: u64,
    /// Fixed cycles added to every transaction on top of service (link/protocol cost).
    #[serde(default)]
    pub protocol_overhead: u64,
    pub device_queue_capacity: u32,
}

impl DeviceSpec {
    pub fn service(&self, class: TxnClass) -> u64 {
        match class {
            TxnClass::Read => self.read_service,
            TxnClass::Write => self.write_service,
        }
    }

    /// Round trip of a transaction on an idle device.
    pub fn unloaded_latency(&self, class: TxnClass) -> u64 {
        self.protocol_overhead + self.service(class)
    }

    /// Saturated read throughput in cachelines per cycle.
    pub fn peak_lines_per_cycle(&self) -> f64 {
        self.parallelism as f64 / self.read_service as f64
    }
}

fn default_admit_width() -> u32 {
    4
}
fn default_line() -> u64 {
    64
}
fn default_hit_service() -> u64 {
    40
}
fn default_coherence_service() -> u64 {
    60
}
fn default_cross_socket() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub name: String,
    pub sockets: u32,
    pub cores_per_socket: u32,
    pub chas_per_socket: u32,
    pub irq_capacity_per_cha: u32,
    pub tor_capacity_per_cha: u32,
    /// IRQ entries moved into the ToR per CHA per cycle.
    #[serde(default = "default_admit_width")]
    pub admit_width: u32,
    #[serde(default = "default_line")]
    pub cacheline_bytes: u64,
    pub clock_hz: f64,
    /// Per socket.
    pub llc_capacity_bytes: u64,
    /// ToR residence of an LLC hit.
    #[serde(default = "default_hit_service")]
    pub llc_hit_service: u64,
    /// ToR residence of a coherence (shared-line atomic) request.
    #[serde(default = "default_coherence_service")]
    pub coherence_service: u64,
    /// Added to the ToR residence of requests whose home socket differs from the issuing core's.
    #[serde(default = "default_cross_socket")]
    pub cross_socket_latency: u64,
    pub ddr_devices: Vec<DeviceSpec>,
    pub cxl_devices: Vec<DeviceSpec>,
    pub ddr_phys_range: AddrRange,
    pub cxl_phys_range: AddrRange,
}

impl PlatformSpec {
    /// Two sockets, each with 8 DDR5 DIMMs and two CXL expanders.
    ///
    /// Desk-scale timing at 1 GHz: DDR read 100 cycles, CXL read 100 cycles
    /// plus 120 cycles of protocol overhead, CXL writes twice as slow as reads.
    /// Per-device parallelism is equal across tiers; the tier gap in peak
    /// bandwidth comes from device count only.
    pub fn platform_a() -> Self {
        let ddr = DeviceSpec {
            parallelism: 16,
            read_service: 100,
            write_service: 100,
            protocol_overhead: 0,
            device_queue_capacity: 64,
        };
        let cxl = DeviceSpec {
            parallelism: 16,
            read_service: 100,
            write_service: 200,
            protocol_overhead: 120,
            device_queue_capacity: 256,
        };
        PlatformSpec {
            name: "platform_a".into(),
            sockets: 2,
            cores_per_socket: 48,
            chas_per_socket: 8,
            irq_capacity_per_cha: 24,
            tor_capacity_per_cha: 72,
            admit_width: 4,
            cacheline_bytes: 64,
            clock_hz: 1.0e9,
            llc_capacity_bytes: 4 << 20,
            llc_hit_service: 40,
            coherence_service: 60,
            cross_socket_latency: 120,
            ddr_devices: vec![ddr; 8],
            cxl_devices: vec![cxl; 2],
            ddr_phys_range: AddrRange::new(0, 2 * 256 * GIB),
            cxl_phys_range: AddrRange::new(TIB, TIB + 2 * 512 * GIB),
        }
    }

    /// Single socket with 12 DDR DIMMs and four CXL expanders.
    pub fn platform_b() -> Self {
        let mut p = Self::platform_a();
        p.name = "platform_b".into();
        p.sockets = 1;
        p.cores_per_socket = 84;
        p.chas_per_socket = 12;
        p.ddr_devices = vec![p.ddr_devices[0].clone(); 12];
        p.cxl_devices = vec![p.cxl_devices[0].clone(); 4];
        p.ddr_phys_range = AddrRange::new(0, 12 * 16 * GIB);
        p.cxl_phys_range = AddrRange::new(TIB, TIB + 4 * 256 * GIB);
        p
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "platform_a" => Some(Self::platform_a()),
            "platform_b" => Some(Self::platform_b()),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["platform_a", "platform_b"]
    }

    pub fn validate(&self) -> Result<()> {
        let loc = |f: &str| format!("platform.{f}");
        let positive = [
            ("sockets", self.sockets as u64),
            ("cores_per_socket", self.cores_per_socket as u64),
            ("chas_per_socket", self.chas_per_socket as u64),
            ("irq_capacity_per_cha", self.irq_capacity_per_cha as u64),
            ("tor_capacity_per_cha", self.tor_capacity_per_cha as u64),
            ("admit_width", self.admit_width as u64),
            ("cacheline_bytes", self.cacheline_bytes),
            ("coherence_service", self.coherence_service),
            ("llc_hit_service", self.llc_hit_service),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(loc(field), "must be > 0"));
            }
        }
        if !self.cacheline_bytes.is_power_of_two() {
            return Err(Error::config(loc("cacheline_bytes"), "must be a power of two"));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::config(loc("clock_hz"), "must be a positive number"));
        }
        if self.ddr_devices.is_empty() {
            return Err(Error::config(loc("ddr_devices"), "at least one device required"));
        }
        if self.cxl_devices.is_empty() {
            return Err(Error::config(loc("cxl_devices"), "at least one device required"));
        }
        for (tier, devs) in [("ddr_devices", &self.ddr_devices), ("cxl_devices", &self.cxl_devices)] {
            for (i, d) in devs.iter().enumerate() {
                let at = format!("platform.{tier}[{i}]");
                if d.parallelism == 0 {
                    return Err(Error::config(at, "parallelism must be >= 1"));
                }
                if d.read_service == 0 || d.write_service == 0 {
                    return Err(Error::config(at, "service times must be > 0"));
                }
            }
        }
        for (field, r) in [("ddr_phys_range", self.ddr_phys_range), ("cxl_phys_range", self.cxl_phys_range)] {
            if r.is_empty() {
                return Err(Error::config(loc(field), "range is empty"));
            }
            let chunk = r.len() / self.sockets as u64;
            if !chunk.is_multiple_of(PAGE_BYTES) || chunk == 0 {
                return Err(Error::config(
                    loc(field),
                    "per-socket share of the range must be a non-zero multiple of 4096",
                ));
            }
        }
        if self.ddr_phys_range.overlaps(&self.cxl_phys_range) {
            return Err(Error::config(loc("cxl_phys_range"), "overlaps ddr_phys_range"));
        }
        Ok(())
    }

    pub fn total_cores(&self) -> u32 {
        self.sockets * self.cores_per_socket
    }

    pub fn total_chas(&self) -> u32 {
        self.sockets * self.chas_per_socket
    }

    pub fn range(&self, tier: Tier) -> AddrRange {
        match tier {
            Tier::Ddr => self.ddr_phys_range,
            Tier::Cxl => self.cxl_phys_range,
        }
    }

    pub fn devices(&self, tier: Tier) -> &[DeviceSpec] {
        match tier {
            Tier::Ddr => &self.ddr_devices,
            Tier::Cxl => &self.cxl_devices,
        }
    }

    /// The slice of `tier`'s range homed on `socket`.
    pub fn socket_range(&self, tier: Tier, socket: u32) -> AddrRange {
        let r = self.range(tier);
        let chunk = r.len() / self.sockets as u64;
        let start = r.start + chunk * socket as u64;
        AddrRange::new(start, start + chunk)
    }

    pub fn address_to_tier(&self, addr: u64) -> Result<Tier> {
        if self.ddr_phys_range.contains(addr) {
            Ok(Tier::Ddr)
        } else if self.cxl_phys_range.contains(addr) {
            Ok(Tier::Cxl)
        } else {
            Err(Error::UnmappedAddress { addr })
        }
    }

    pub fn home_socket(&self, addr: u64) -> Result<u32> {
        let tier = self.address_to_tier(addr)?;
        let r = self.range(tier);
        let chunk = r.len() / self.sockets as u64;
        Ok((((addr - r.start) / chunk) as u32).min(self.sockets - 1))
    }

    /// CHA within the home socket: cacheline index modulo the CHA count, so
    /// any run of `k * chas_per_socket` consecutive lines is spread exactly evenly.
    pub fn hash_to_cha(&self, addr: u64) -> u32 {
        let n = self.chas_per_socket as u64;
        ((addr / self.cacheline_bytes) % n) as u32
    }

    /// Device within the home socket's tier. DDR interleaves per cacheline,
    /// CXL per 4 KiB page.
    pub fn device_index(&self, tier: Tier, socket: u32, addr: u64) -> u32 {
        let base = self.socket_range(tier, socket).start;
        let off = addr - base;
        let n = self.devices(tier).len() as u64;
        let unit = match tier {
            Tier::Ddr => self.cacheline_bytes,
            Tier::Cxl => PAGE_BYTES,
        };
        ((off / unit) % n) as u32
    }

    /// Analytic saturated read bandwidth of one socket's `tier`, in bytes/second.
    pub fn peak_bandwidth(&self, tier: Tier) -> f64 {
        self.devices(tier)
            .iter()
            .map(|d| d.peak_lines_per_cycle() * self.cacheline_bytes as f64 * self.clock_hz)
            .sum()
    }

    /// Unloaded read round trip of the first device of `tier`.
    pub fn unloaded_read_latency(&self, tier: Tier) -> u64 {
        self.devices(tier)[0].unloaded_latency(TxnClass::Read)
    }

    pub fn cycles_to_seconds(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_hz
    }
}
