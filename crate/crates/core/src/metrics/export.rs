use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{avg_tor_latency, MetricsStore};
use crate::controller::Decision;
use crate::engine::{EventSink, Request, TorClass};
use crate::error::{Error, Result};
use crate::platform::Tier;

pub const SCHEMA_VERSION: u32 = 1;

const METRICS_HEADER: [&str; 5] = ["window", "t_start", "t_end", "series", "value"];

fn fixed(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Long-format window series: one row per window per series, in a fixed
/// order, floats at six decimals.
pub fn write_metrics_csv(store: &MetricsStore, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(METRICS_HEADER)?;
    for win in &store.windows {
        let mut rows: Vec<(String, String)> = Vec::new();
        for tier in Tier::ALL {
            rows.push((format!("{tier}_bytes"), win.tier_bytes(tier, store.line).to_string()));
        }
        for tier in Tier::ALL {
            rows.push((format!("{tier}_bw_gbps"), fixed(store.bandwidth(win, tier) / 1e9)));
        }
        for c in TorClass::ALL {
            rows.push((format!("tor_inserts_{}", c.as_str()), win.inserts(c).to_string()));
        }
        for c in TorClass::ALL {
            rows.push((format!("tor_occupancy_{}", c.as_str()), win.occupancy(c).to_string()));
        }
        let ins: u64 = TorClass::ALL.iter().map(|&c| win.inserts(c)).sum();
        let occ: u64 = TorClass::ALL.iter().map(|&c| win.occupancy(c)).sum();
        rows.push(("tor_latency".into(), fixed(avg_tor_latency(occ, ins).unwrap_or(f64::NAN))));
        for c in TorClass::ALL {
            rows.push((format!("census_{}", c.as_str()), win.census(c).to_string()));
        }
        for (i, name) in store.workload_names.iter().enumerate() {
            rows.push((format!("wl.{name}.requests"), win.workload_requests[i].to_string()));
            rows.push((format!("wl.{name}.bw_gbps"), fixed(store.workload_bandwidth(win, i) / 1e9)));
        }
        for (i, c) in win.chas.iter().enumerate() {
            rows.push((format!("cha{i}.inserts"), c.inserts_total().to_string()));
            rows.push((format!("cha{i}.occupancy"), c.occupancy_total().to_string()));
        }
        let (idx, t0, t1) = (win.index.to_string(), win.t_start.to_string(), win.t_end.to_string());
        for (series, value) in rows {
            w.write_record([idx.as_str(), &t0, &t1, &series, &value])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CsvRow {
    pub window: usize,
    pub t_start: u64,
    pub t_end: u64,
    pub series: String,
    pub value: String,
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_controller_csv(decisions: &[Decision], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["window_id", "alpha", "t_avg", "t_cxl", "target", "level", "rate_cap"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), fixed);
    for d in decisions {
        w.write_record([
            d.window_id.to_string(),
            opt(d.alpha),
            opt(d.t_avg),
            opt(d.t_cxl),
            opt(d.target),
            d.level.to_string(),
            opt(d.rate_cap),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierTotals {
    pub ddr_bytes: u64,
    pub cxl_bytes: u64,
    pub ddr_bandwidth_gbps: f64,
    pub cxl_bandwidth_gbps: f64,
    pub requests_completed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSummary {
    pub name: String,
    pub requests: u64,
    pub bandwidth_gbps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_p50: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_p99: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub duration_cycles: u64,
    pub windows: usize,
    pub controller: String,
    pub totals: TierTotals,
    pub workloads: Vec<WorkloadSummary>,
}

/// Round to six decimals so JSON output matches the CSV precision.
pub(crate) fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

impl Summary {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        f.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Parse { path: path.into(), source })
    }
}

/// Per-request CSV log, one row per request leaving the ToR. Requests
/// still in flight at the end are appended by `finish` with an empty
/// `t_complete`.
pub struct EventLogWriter {
    w: csv::Writer<BufWriter<File>>,
    error: Option<csv::Error>,
}

pub const EVENT_HEADER: [&str; 11] = [
    "id", "core", "kind", "tier", "cha", "t_issued", "t_irq", "t_tor", "t_dispatch", "t_complete", "class",
];

impl EventLogWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(EVENT_HEADER)?;
        Ok(EventLogWriter { w, error: None })
    }

    fn row(&mut self, r: &Request) {
        if self.error.is_some() {
            return;
        }
        let opt = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
        let res = self.w.write_record([
            r.id.to_string(),
            r.core.to_string(),
            r.kind.as_str().to_string(),
            r.tier.as_str().to_string(),
            r.cha.to_string(),
            r.t_issued.to_string(),
            opt(r.t_irq),
            opt(r.t_tor),
            opt(r.t_dispatch),
            opt(r.t_complete),
            r.class.as_str().to_string(),
        ]);
        if let Err(e) = res {
            self.error = Some(e);
        }
    }
}

impl EventSink for EventLogWriter {
    fn record(&mut self, req: &Request) {
        self.row(req);
    }

    fn finish(&mut self, in_flight: &[&Request]) -> Result<()> {
        for r in in_flight {
            self.row(r);
        }
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.w.flush().map_err(|e| Error::io("events.csv", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_store_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_metrics_csv(&MetricsStore::new(64, 1e9, vec![]), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "window,t_start,t_end,series,value\n");
        assert!(read_metrics_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn unwritable_path() {
        let e = write_metrics_csv(&MetricsStore::new(64, 1e9, vec![]), Path::new("/nonexistent/dir/m.csv"));
        assert!(matches!(e, Err(Error::Io { .. })));
    }

    #[test]
    fn fixed_precision() {
        assert_eq!(fixed(1.0 / 3.0), "0.333333");
        assert_eq!(fixed(f64::NAN), "");
        assert_eq!(round6(0.1234567), 0.123457);
    }
}
