//! Scenario files: platform, workloads, LLC partitioning, controller and
//! run length in one JSON document, plus the bundled presets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::platform::PlatformSpec;
use crate::workloads::{layout, WorkloadSpec};

/// A preset name or a full inline platform description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlatformRef {
    Preset(String),
    Inline(Box<PlatformSpec>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default)]
    pub jitter: bool,
    #[serde(default)]
    pub check_invariants: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlcConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Per-socket capacity override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bytes: Option<u64>,
    /// Capacity fraction per workload name; unlisted workloads compete freely.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub partitions: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub platform: PlatformRef,
    pub seed: u64,
    pub duration_cycles: u64,
    /// Defaults to the controller's sample period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_window_cycles: Option<u64>,
    #[serde(default)]
    pub engine: EngineConfig,
    pub workloads: Vec<WorkloadSpec>,
    #[serde(default)]
    pub llc: LlcConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
}

const PRESETS: &[(&str, &str)] = &[
    ("fig3_scaling", include_str!("../scenarios/fig3_scaling.json")),
    ("fig4_corun", include_str!("../scenarios/fig4_corun.json")),
    ("fig5_tor_latency", include_str!("../scenarios/fig5_tor_latency.json")),
    ("fig6_llc_partition", include_str!("../scenarios/fig6_llc_partition.json")),
    ("fig7_lat_share", include_str!("../scenarios/fig7_lat_share.json")),
    ("fig9_miku_phases", include_str!("../scenarios/fig9_miku_phases.json")),
    ("calib_ddr", include_str!("../scenarios/calib_ddr.json")),
    ("calib_cxl", include_str!("../scenarios/calib_cxl.json")),
];

/// Short names accepted in place of a preset name.
const ALIASES: &[(&str, &str)] = &[("fig9_miku", "fig9_miku_phases")];

fn canonical(name: &str) -> &str {
    ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, n)| n)
}

impl Scenario {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|source| Error::Parse {
            path: origin.into(),
            source,
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|(n, _)| *n).collect()
    }

    pub fn preset(name: &str) -> Result<Self> {
        let name = canonical(name);
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            Error::config(
                "scenario",
                format!("unknown preset `{name}`; valid presets: {}", Self::preset_names().join(", ")),
            )
        })?;
        Self::from_json(text, Path::new(&format!("<preset {name}>")))
    }

    /// A file path if one exists, otherwise a preset name.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        let p = Path::new(name_or_path);
        if p.is_file() {
            Self::load(p)
        } else if name_or_path.ends_with(".json") {
            let stem = canonical(p.file_stem().and_then(|s| s.to_str()).unwrap_or_default());
            if PRESETS.iter().any(|(n, _)| *n == stem) {
                Self::preset(stem)
            } else {
                Err(Error::config(
                    "scenario",
                    format!(
                        "no file `{name_or_path}` and no such preset; valid presets: {}",
                        Self::preset_names().join(", ")
                    ),
                ))
            }
        } else {
            Self::preset(name_or_path)
        }
    }

    pub fn platform_spec(&self) -> Result<PlatformSpec> {
        match &self.platform {
            PlatformRef::Preset(name) => PlatformSpec::preset(name).ok_or_else(|| {
                Error::config(
                    "platform",
                    format!(
                        "unknown platform preset `{name}`; valid presets: {}",
                        PlatformSpec::preset_names().join(", ")
                    ),
                )
            }),
            PlatformRef::Inline(p) => Ok((**p).clone()),
        }
    }

    pub fn report_window(&self) -> u64 {
        self.report_window_cycles.unwrap_or(self.controller.sample_period_cycles)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        let platform = self.platform_spec()?;
        platform.validate()?;
        if self.report_window_cycles == Some(0) {
            return Err(Error::config("report_window_cycles", "must be > 0"));
        }
        self.controller.validate()?;
        let mut names = BTreeSet::new();
        let mut per_socket = vec![0u32; platform.sockets as usize];
        for w in &self.workloads {
            w.validate(platform.cacheline_bytes)?;
            if !names.insert(w.name.as_str()) {
                return Err(Error::config(format!("workloads[{}]", w.name), "duplicate workload name"));
            }
            let at = format!("workloads[{}]", w.name);
            if w.socket >= platform.sockets {
                return Err(Error::config(at, format!("socket {} does not exist", w.socket)));
            }
            per_socket[w.socket as usize] += w.threads;
            if per_socket[w.socket as usize] > platform.cores_per_socket {
                return Err(Error::config(at, format!("not enough free cores on socket {}", w.socket)));
            }
        }
        layout(&platform, &self.workloads)?;
        let mut sum = 0.0;
        for (name, &f) in &self.llc.partitions {
            if !names.contains(name.as_str()) {
                return Err(Error::config(format!("llc.partitions.{name}"), "no workload with this name"));
            }
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("llc.partitions.{name}"), "fraction outside [0, 1]"));
            }
            sum += f;
        }
        if sum > 1.0 + 1e-9 {
            return Err(Error::config("llc.partitions", format!("fractions sum to {sum:.3}, more than 1")));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical (compact, fixed field order) JSON encoding.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn workload_index(&self, name: &str) -> Option<usize> {
        self.workloads.iter().position(|w| w.name == name)
    }
}
