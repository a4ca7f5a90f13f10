//! Deterministic discrete-event simulation of V2V beaconing with multihop
//! forwarding through a pluggable routing filter.
//!
//! Every vehicle broadcasts a framed VDU at the beacon rate. Frames are sensed
//! by every vehicle whose link budget clears the threshold; two frames that
//! overlap in time at a receiver destroy each other. Intact frames go through
//! the configured filter and, when accepted, are processed and re-broadcast
//! after a short random jitter.

mod engine;
mod metrics;
pub mod mobility;
pub mod radio;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmr::{CmrConfig, FilterKind};

pub use engine::run_simulation;
pub use metrics::{write_cdf_csv, write_metrics_csv, SimMetrics, VehicleMetrics, CDF_HEADER, METRICS_HEADER};
pub use mobility::{generate_mobility, MobilityParams, Trajectories, VehicleAgent};
pub use radio::{antenna_gain, link_budget, AntennaType, RadioConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub duration_s: f64,
    pub beacon_rate_hz: f64,
    pub vehicle_count: usize,
    pub seed: u64,
    pub filter: FilterKind,
    pub radio: RadioConfig,
    pub cmr: CmrConfig,
    pub mobility: MobilityParams,
    /// Detected objects carried by each beacon.
    pub objects_per_vdu: usize,
    /// Forward delay is drawn uniformly from this inclusive range of whole milliseconds.
    pub forward_jitter_ms: (u32, u32),
    /// Position sampling interval.
    pub mobility_step_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            area_width_m: 4000.0,
            area_height_m: 5000.0,
            duration_s: 60.0,
            beacon_rate_hz: 10.0,
            vehicle_count: 212,
            seed: 1,
            filter: FilterKind::Cmr,
            radio: RadioConfig::default(),
            cmr: CmrConfig::default(),
            mobility: MobilityParams::default(),
            objects_per_vdu: 10,
            forward_jitter_ms: (1, 5),
            mobility_step_s: 0.1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.area_width_m) || !positive(self.area_height_m) {
            return bad("area dimensions must be positive");
        }
        if !positive(self.duration_s) {
            return bad("duration must be positive");
        }
        if !(1.0..=10.0).contains(&self.beacon_rate_hz) {
            return bad("beacon rate must be between 1 and 10 Hz");
        }
        if !positive(self.radio.bit_rate_bps) {
            return bad("bit rate must be positive");
        }
        if ![self.radio.tx_power_dbm, self.radio.noise_floor_dbm, self.radio.snr_margin_db]
            .iter()
            .all(|x| x.is_finite())
        {
            return bad("radio power levels must be finite");
        }
        if !positive(self.radio.breakpoint_m) || !positive(self.radio.exponent_near) || !positive(self.radio.exponent_far)
        {
            return bad("path loss breakpoint and exponents must be positive");
        }
        self.cmr.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if self.objects_per_vdu > crate::vdu_codec::MAX_OBJECTS {
            return bad("objects_per_vdu exceeds the VDU object limit");
        }
        let (lo, hi) = self.forward_jitter_ms;
        if lo > hi {
            return bad("forward jitter range is inverted");
        }
        if !positive(self.mobility_step_s) {
            return bad("mobility step must be positive");
        }
        let m = &self.mobility;
        if self.vehicle_count > 0 && m.grid_rows + m.grid_cols == 0 {
            return bad("mobility grid has no roads");
        }
        if !(m.speed_min_mps >= 0.0 && m.speed_max_mps >= m.speed_min_mps && m.speed_max_mps.is_finite()) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(0.0..=1.0).contains(&m.turn_probability) {
            return bad("turn probability must be within [0, 1]");
        }
        if self.vehicle_count > u32::MAX as usize {
            return bad("too many vehicles");
        }
        Ok(())
    }
}
