//! Link budget: antenna patterns plus a two-slope log-distance path loss.

use serde::{Deserialize, Serialize};

use super::mobility::VehicleAgent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AntennaType {
    Isotropic,
    /// Gain peaks along the vehicle's longitudinal axis and dips sideways.
    FrontRear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub bit_rate_bps: f64,
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    /// Required margin above the noise floor for a frame to be sensed.
    pub snr_margin_db: f64,
    pub antenna: AntennaType,
    /// Front-rear gain at 0/180 degrees.
    pub front_rear_peak_dbi: f64,
    /// Front-rear gain at +/-90 degrees.
    pub front_rear_null_dbi: f64,
    /// Loss at 1 m.
    pub reference_loss_db: f64,
    pub breakpoint_m: f64,
    pub exponent_near: f64,
    pub exponent_far: f64,
    /// PHY/MAC bytes added to every frame for airtime accounting.
    pub phy_overhead_bytes: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            bit_rate_bps: 6e6,
            tx_power_dbm: 13.0,
            noise_floor_dbm: -98.0,
            snr_margin_db: 10.0,
            antenna: AntennaType::FrontRear,
            front_rear_peak_dbi: 5.0,
            front_rear_null_dbi: -10.0,
            // free space at 1 m, 5.9 GHz
            reference_loss_db: 47.86,
            breakpoint_m: 100.0,
            exponent_near: 2.0,
            exponent_far: 3.8,
            phy_overhead_bytes: 58,
        }
    }
}

impl RadioConfig {
    /// Weakest received power that still occupies the receiver.
    pub fn threshold_dbm(&self) -> f64 {
        self.noise_floor_dbm + self.snr_margin_db
    }

    pub fn airtime_s(&self, frame_bytes: usize) -> f64 {
        (frame_bytes + self.phy_overhead_bytes) as f64 * 8.0 / self.bit_rate_bps
    }

    pub fn gain_dbi(&self, theta_deg: f64) -> f64 {
        antenna_gain(theta_deg, self.antenna, self.front_rear_peak_dbi, self.front_rear_null_dbi)
    }

    fn max_gain_dbi(&self) -> f64 {
        match self.antenna {
            AntennaType::Isotropic => 0.0,
            AntennaType::FrontRear => self.front_rear_peak_dbi.max(self.front_rear_null_dbi),
        }
    }

    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        let near = |d: f64| self.reference_loss_db + 10.0 * self.exponent_near * d.log10();
        if d <= self.breakpoint_m {
            near(d)
        } else {
            near(self.breakpoint_m) + 10.0 * self.exponent_far * (d / self.breakpoint_m).log10()
        }
    }

    /// Inverse of [`path_loss_db`](Self::path_loss_db) for losses above the 1 m reference.
    pub fn distance_for_loss(&self, loss_db: f64) -> f64 {
        let at_break = self.path_loss_db(self.breakpoint_m);
        if loss_db <= at_break {
            10f64.powf((loss_db - self.reference_loss_db) / (10.0 * self.exponent_near))
        } else {
            self.breakpoint_m * 10f64.powf((loss_db - at_break) / (10.0 * self.exponent_far))
        }
    }

    /// Distance beyond which no antenna orientation can reach the threshold.
    pub fn cutoff_radius_m(&self) -> f64 {
        let budget = self.tx_power_dbm + 2.0 * self.max_gain_dbi() - self.threshold_dbm();
        self.distance_for_loss(budget)
    }
}

/// Gain in dBi at `theta_deg` off the vehicle's heading.
///
/// Front-rear: `peak - (peak - null) * sin²θ`, i.e. `5 - 15 sin²θ` by default.
pub fn antenna_gain(theta_deg: f64, antenna: AntennaType, peak_dbi: f64, null_dbi: f64) -> f64 {
    match antenna {
        AntennaType::Isotropic => 0.0,
        AntennaType::FrontRear => {
            let s = theta_deg.to_radians().sin();
            peak_dbi - (peak_dbi - null_dbi) * s * s
        }
    }
}

/// Compass bearing from `a` to `b` in degrees (0 = +y, clockwise).
pub fn bearing_deg(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    (bx - ax).atan2(by - ay).to_degrees().rem_euclid(360.0)
}

/// Received power at `rx` for a frame sent by `tx`, in dBm.
pub fn link_budget(tx: &VehicleAgent, rx: &VehicleAgent, cfg: &RadioConfig) -> f64 {
    let (dx, dy) = (rx.x - tx.x, rx.y - tx.y);
    let d = dx.hypot(dy);
    let to_rx = bearing_deg(tx.x, tx.y, rx.x, rx.y);
    let to_tx = (to_rx + 180.0).rem_euclid(360.0);
    cfg.tx_power_dbm + cfg.gain_dbi(to_rx - tx.heading_deg) + cfg.gain_dbi(to_tx - rx.heading_deg)
        - cfg.path_loss_db(d)
}

pub fn can_sense(tx: &VehicleAgent, rx: &VehicleAgent, cfg: &RadioConfig) -> bool {
    link_budget(tx, rx, cfg) >= cfg.threshold_dbm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(x: f64, y: f64, heading: f64) -> VehicleAgent {
        VehicleAgent {
            id: 0,
            x,
            y,
            speed_mps: 0.0,
            heading_deg: heading,
        }
    }

    #[test]
    fn front_rear_pattern() {
        let g = |t| antenna_gain(t, AntennaType::FrontRear, 5.0, -10.0);
        assert!((g(0.0) - 5.0).abs() < 1e-12);
        assert!((g(180.0) - 5.0).abs() < 1e-12);
        assert!((g(90.0) + 10.0).abs() < 1e-12);
        assert!((g(-90.0) + 10.0).abs() < 1e-12);
        assert!((g(30.0) - g(-30.0)).abs() < 1e-12);
        assert!((g(30.0) - g(150.0)).abs() < 1e-12);
        assert_eq!(antenna_gain(37.0, AntennaType::Isotropic, 5.0, -10.0), 0.0);
    }

    #[test]
    fn bearings() {
        assert_eq!(bearing_deg(0.0, 0.0, 0.0, 10.0), 0.0);
        assert_eq!(bearing_deg(0.0, 0.0, 10.0, 0.0), 90.0);
        assert_eq!(bearing_deg(0.0, 0.0, 0.0, -10.0), 180.0);
        assert_eq!(bearing_deg(0.0, 0.0, -10.0, 0.0), 270.0);
    }

    #[test]
    fn near_field_is_tx_power_minus_reference() {
        let cfg = RadioConfig {
            antenna: AntennaType::Isotropic,
            ..Default::default()
        };
        let p = link_budget(&agent(0.0, 0.0, 0.0), &agent(0.0, 1e-6, 0.0), &cfg);
        assert!((p - (13.0 - 47.86)).abs() < 1e-9);
        assert!(p > cfg.threshold_dbm());
    }

    #[test]
    fn side_by_side_loses_thirty_db() {
        let cfg = RadioConfig::default();
        // both heading north; one behind the other vs abreast
        let inline = link_budget(&agent(0.0, 0.0, 0.0), &agent(0.0, 60.0, 0.0), &cfg);
        let abreast = link_budget(&agent(0.0, 0.0, 0.0), &agent(60.0, 0.0, 0.0), &cfg);
        assert!((inline - abreast - 30.0).abs() < 1e-9);
    }

    #[test]
    fn cutoff_radius_matches_threshold() {
        let cfg = RadioConfig {
            antenna: AntennaType::Isotropic,
            ..Default::default()
        };
        let r = cfg.cutoff_radius_m();
        // 13 - (-88) = 101 dB budget: 87.86 + 38 log10(r/100) = 101
        let expected = 100.0 * 10f64.powf((101.0 - 87.86) / 38.0);
        assert!((r - expected).abs() < 1e-6, "{r} vs {expected}");
        let tx = agent(0.0, 0.0, 0.0);
        assert!(can_sense(&tx, &agent(0.0, r * 0.999, 0.0), &cfg));
        assert!(!can_sense(&tx, &agent(0.0, r * 1.001, 0.0), &cfg));
    }

    #[test]
    fn path_loss_continuous_at_breakpoint() {
        let cfg = RadioConfig::default();
        let a = cfg.path_loss_db(100.0 - 1e-9);
        let b = cfg.path_loss_db(100.0 + 1e-9);
        assert!((a - b).abs() < 1e-6);
        for d in [3.0, 50.0, 150.0, 700.0] {
            assert!((cfg.distance_for_loss(cfg.path_loss_db(d)) - d).abs() < 1e-9);
        }
    }

    #[test]
    fn airtime_of_framed_vdu() {
        let cfg = RadioConfig::default();
        assert!((cfg.airtime_s(103) - 161.0 * 8.0 / 6e6).abs() < 1e-15);
    }
}
