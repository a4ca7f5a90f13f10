//! Scenario files: TOML mirroring [`SimConfig`] plus the filter list and output location.
//!
//! ```toml
//! vehicle_count = 212
//! duration_s = 60.0
//! seed = 1
//! filters = ["cmr", "hopdis", "hop"]
//! output_dir = "out"
//!
//! [cmr]
//! direction_threshold_deg = 30.0
//!
//! [mobility]
//! grid_rows = 4
//! grid_cols = 5
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmr::{CmrConfig, FilterKind};
use crate::netsim::{MobilityParams, RadioConfig, SimConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario {path}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub duration_s: f64,
    pub beacon_rate_hz: f64,
    pub vehicle_count: usize,
    pub seed: u64,
    pub objects_per_vdu: usize,
    pub forward_jitter_ms: (u32, u32),
    pub mobility_step_s: f64,
    pub filters: Vec<FilterKind>,
    /// Relative paths resolve against the scenario file's directory.
    pub output_dir: Option<PathBuf>,
    pub radio: RadioConfig,
    pub cmr: CmrConfig,
    pub mobility: MobilityParams,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let d = SimConfig::default();
        ScenarioFile {
            area_width_m: d.area_width_m,
            area_height_m: d.area_height_m,
            duration_s: d.duration_s,
            beacon_rate_hz: d.beacon_rate_hz,
            vehicle_count: d.vehicle_count,
            seed: d.seed,
            objects_per_vdu: d.objects_per_vdu,
            forward_jitter_ms: d.forward_jitter_ms,
            mobility_step_s: d.mobility_step_s,
            filters: FilterKind::ALL.to_vec(),
            output_dir: None,
            radio: d.radio,
            cmr: d.cmr,
            mobility: d.mobility,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ScenarioError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn sim_config(&self, filter: FilterKind) -> SimConfig {
        SimConfig {
            area_width_m: self.area_width_m,
            area_height_m: self.area_height_m,
            duration_s: self.duration_s,
            beacon_rate_hz: self.beacon_rate_hz,
            vehicle_count: self.vehicle_count,
            seed: self.seed,
            filter,
            radio: self.radio,
            cmr: self.cmr,
            mobility: self.mobility,
            objects_per_vdu: self.objects_per_vdu,
            forward_jitter_ms: self.forward_jitter_ms,
            mobility_step_s: self.mobility_step_s,
        }
    }
}
