use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64;

pub const BYTES_PER_MB: u64 = 1_000_000;
pub const BITS_PER_MBPS: f64 = 1e6;
pub const HZ_PER_GHZ: f64 = 1e9;

pub const DEFAULT_BANDWIDTH_MBPS: f64 = 10.0;
pub const DEFAULT_EDGE_CORES: u32 = 2;
pub const DEFAULT_EDGE_CLOCK_GHZ: f64 = 1.5;
pub const DEFAULT_EDGE_STORAGE_MB: u64 = 8000;
pub const DEFAULT_SERVER_CORES: u32 = 8;
pub const DEFAULT_SERVER_CLOCK_GHZ: f64 = 2.6;
pub const DEFAULT_DTYPE_BYTES: u64 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("failed to read scenario: {0}")]
    Io(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSpec {
    pub cores: u32,
    pub clock_hz: f64,
    /// `None` means unbounded.
    pub storage_bytes: Option<u64>,
    /// Operations per cycle per core.
    pub kappa: f64,
}

impl DeviceSpec {
    /// Operations per second.
    pub fn capacity(&self) -> f64 {
        f64::from(self.cores) * self.clock_hz * self.kappa
    }

    fn validate(&self, role: &str) -> Result<(), ScenarioError> {
        if self.cores < 1 {
            return Err(ScenarioError::Invalid(format!("{role} cores must be >= 1")));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(ScenarioError::Invalid(format!("{role} clock must be > 0")));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(ScenarioError::Invalid(format!("{role} kappa must be > 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub bandwidth_bps: f64,
}

impl LinkSpec {
    pub fn from_mbps(mbps: f64) -> Self {
        Self {
            bandwidth_bps: mbps * BITS_PER_MBPS,
        }
    }

    pub fn mbps(&self) -> f64 {
        self.bandwidth_bps / BITS_PER_MBPS
    }
}

/// All hardware and network parameters of one planning problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub edge: DeviceSpec,
    pub server: DeviceSpec,
    pub link: LinkSpec,
    pub dtype_bytes: u64,
    /// Charge the upstream transfer of the final output when every layer runs
    /// on the edge.
    pub tx_at_full_edge: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            edge: DeviceSpec {
                cores: DEFAULT_EDGE_CORES,
                clock_hz: DEFAULT_EDGE_CLOCK_GHZ * HZ_PER_GHZ,
                storage_bytes: Some(DEFAULT_EDGE_STORAGE_MB * BYTES_PER_MB),
                kappa: 1.0,
            },
            server: DeviceSpec {
                cores: DEFAULT_SERVER_CORES,
                clock_hz: DEFAULT_SERVER_CLOCK_GHZ * HZ_PER_GHZ,
                storage_bytes: None,
                kappa: 1.0,
            },
            link: LinkSpec::from_mbps(DEFAULT_BANDWIDTH_MBPS),
            dtype_bytes: DEFAULT_DTYPE_BYTES,
            tx_at_full_edge: true,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    cores: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clock_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    storage_mb: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    edge: DeviceFile,
    #[serde(default)]
    server: DeviceFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth_mbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dtype_bytes: Option<u64>,
}

fn device_from_file(f: DeviceFile, defaults: DeviceSpec) -> DeviceSpec {
    DeviceSpec {
        cores: f.cores.unwrap_or(defaults.cores),
        clock_hz: f.clock_ghz.map_or(defaults.clock_hz, |g| g * HZ_PER_GHZ),
        storage_bytes: f
            .storage_mb
            .map(|mb| mb.saturating_mul(BYTES_PER_MB))
            .or(defaults.storage_bytes),
        kappa: f.kappa.unwrap_or(defaults.kappa),
    }
}

fn device_to_file(d: &DeviceSpec) -> DeviceFile {
    DeviceFile {
        cores: Some(d.cores),
        clock_ghz: Some(d.clock_hz / HZ_PER_GHZ),
        storage_mb: d.storage_bytes.map(|b| b / BYTES_PER_MB),
        kappa: Some(d.kappa),
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.edge.validate("edge")?;
        self.server.validate("server")?;
        if !(self.link.bandwidth_bps.is_finite() && self.link.bandwidth_bps > 0.0) {
            return Err(ScenarioError::Invalid("bandwidth must be > 0".into()));
        }
        if self.dtype_bytes == 0 {
            return Err(ScenarioError::Invalid("dtype_bytes must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses the scenario JSON format; absent fields take the defaults.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let d = Scenario::default();
        let s = Scenario {
            edge: device_from_file(file.edge, d.edge),
            server: device_from_file(file.server, d.server),
            link: file.bandwidth_mbps.map_or(d.link, LinkSpec::from_mbps),
            dtype_bytes: file.dtype_bytes.unwrap_or(d.dtype_bytes),
            tx_at_full_edge: d.tx_at_full_edge,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON form (all fields explicit; unbounded storage omitted).
    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            edge: device_to_file(&self.edge),
            server: device_to_file(&self.server),
            bandwidth_mbps: Some(self.link.mbps()),
            dtype_bytes: Some(self.dtype_bytes),
        };
        serde_json::to_string(&file).expect("scenario serializes")
    }

    /// 64-bit digest of the canonical JSON form.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.to_json().as_bytes())
    }
}
