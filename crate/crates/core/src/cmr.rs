//! Directional multihop routing filter and its two baselines.
//!
//! On every reception the hop budget is decremented. The packet is dropped
//! when the budget underflows, when the originator's heading deviates from the
//! receiver's by more than the direction threshold, or when the originator is
//! farther than the distance threshold. Otherwise it is processed locally and
//! re-broadcast with the decremented budget.
//!
//! `HopDis` skips the heading check and `Hop` checks only the budget, so
//! `CMR ⊆ HopDis ⊆ Hop` in terms of forwarded packets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vdu_codec::CmrPacket;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmrConfigError {
    #[error("ttl_initial must be at least 1")]
    ZeroTtl,
    #[error("direction threshold {0} outside (0, 180]")]
    DirectionThreshold(f64),
    #[error("distance threshold {0} must be positive")]
    DistanceThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmrConfig {
    /// Hop budget assigned by the originator.
    pub ttl_initial: u8,
    /// Max heading deviation in degrees.
    pub direction_threshold_deg: f64,
    /// Max distance to the originator in meters.
    pub distance_threshold_m: f64,
}

impl Default for CmrConfig {
    fn default() -> Self {
        CmrConfig {
            ttl_initial: 2,
            direction_threshold_deg: 30.0,
            distance_threshold_m: 100.0,
        }
    }
}

impl CmrConfig {
    pub fn validate(&self) -> Result<(), CmrConfigError> {
        if self.ttl_initial == 0 {
            return Err(CmrConfigError::ZeroTtl);
        }
        let dt = self.direction_threshold_deg;
        if !(dt > 0.0 && dt <= 180.0) {
            return Err(CmrConfigError::DirectionThreshold(dt));
        }
        if !(self.distance_threshold_m > 0.0 && self.distance_threshold_m.is_finite()) {
            return Err(CmrConfigError::DistanceThreshold(self.distance_threshold_m));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Position {
    /// Local planar meters.
    Planar { x: f64, y: f64 },
    /// Degrees.
    Geodetic { lat: f64, lon: f64 },
}

impl Position {
    /// Planar Euclidean or haversine distance; `None` when the systems differ.
    pub fn distance_to(&self, other: &Position) -> Option<f64> {
        match (*self, *other) {
            (Position::Planar { x: x1, y: y1 }, Position::Planar { x: x2, y: y2 }) => Some((x1 - x2).hypot(y1 - y2)),
            (Position::Geodetic { lat: a1, lon: o1 }, Position::Geodetic { lat: a2, lon: o2 }) => {
                Some(haversine_m(a1, o1, a2, o2))
            }
            _ => None,
        }
    }
}

pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverState {
    /// Degrees in `[0, 360)`.
    pub heading_deg: f64,
    pub position: Position,
}

/// The routing-relevant view of a received frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterInfo {
    pub ttl: u8,
    /// Originator heading in degrees.
    pub heading_deg: f64,
    /// Originator position.
    pub position: Position,
}

impl TransmitterInfo {
    /// Reads heading and GPS from the VDU; the routed frame does not duplicate them.
    pub fn from_packet(pkt: &CmrPacket) -> Self {
        let v = &pkt.payload;
        TransmitterInfo {
            ttl: pkt.ttl,
            heading_deg: v.imu.heading_deg(),
            position: Position::Geodetic {
                lat: v.gps.lat_deg(),
                lon: v.gps.lon_deg(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoutingDecision {
    Drop,
    ForwardAndProcess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Cmr,
    HopDis,
    Hop,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Cmr, FilterKind::HopDis, FilterKind::Hop];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Cmr => "cmr",
            FilterKind::HopDis => "hopdis",
            FilterKind::Hop => "hop",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FilterKind::Cmr => "CMR",
            FilterKind::HopDis => "Hop&Dis",
            FilterKind::Hop => "Hop",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cmr" => Ok(FilterKind::Cmr),
            "hopdis" | "hop&dis" | "hop-dis" => Ok(FilterKind::HopDis),
            "hop" => Ok(FilterKind::Hop),
            other => Err(format!("unknown filter '{other}' (expected cmr, hopdis or hop)")),
        }
    }
}

/// Decision plus the decremented budget (may be `-1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub decision: RoutingDecision,
    pub ttl: i16,
}

impl Verdict {
    pub fn forwards(&self) -> bool {
        self.decision == RoutingDecision::ForwardAndProcess
    }
}

/// Smallest angle between two headings, in `[0, 180]`.
pub fn angular_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Applies `filter` to a frame. Mixed coordinate systems count as out of range.
pub fn decide(filter: FilterKind, tx: &TransmitterInfo, rx: &ReceiverState, cfg: &CmrConfig) -> Verdict {
    let ttl = tx.ttl as i16 - 1;
    let expired = ttl < 0;
    let far = || {
        tx.position
            .distance_to(&rx.position)
            .is_none_or(|d| d > cfg.distance_threshold_m)
    };
    let off_course = || angular_diff(tx.heading_deg, rx.heading_deg) > cfg.direction_threshold_deg;
    let drop = match filter {
        FilterKind::Cmr => expired || off_course() || far(),
        FilterKind::HopDis => expired || far(),
        FilterKind::Hop => expired,
    };
    Verdict {
        decision: if drop {
            RoutingDecision::Drop
        } else {
            RoutingDecision::ForwardAndProcess
        },
        ttl,
    }
}

pub fn cmr_decide(pkt: &CmrPacket, rx: &ReceiverState, cfg: &CmrConfig) -> Verdict {
    decide(FilterKind::Cmr, &TransmitterInfo::from_packet(pkt), rx, cfg)
}

pub fn hopdis_decide(pkt: &CmrPacket, rx: &ReceiverState, cfg: &CmrConfig) -> Verdict {
    decide(FilterKind::HopDis, &TransmitterInfo::from_packet(pkt), rx, cfg)
}

pub fn hop_decide(pkt: &CmrPacket, cfg: &CmrConfig) -> Verdict {
    let tx = TransmitterInfo::from_packet(pkt);
    let rx = ReceiverState {
        heading_deg: tx.heading_deg,
        position: tx.position,
    };
    decide(FilterKind::Hop, &tx, &rx, cfg)
}

/// The copy to re-broadcast, carrying the decremented budget.
pub fn forwarded_copy(pkt: &CmrPacket, verdict: Verdict) -> Option<CmrPacket> {
    verdict.forwards().then(|| CmrPacket {
        ttl: verdict.ttl as u8,
        payload: pkt.payload.clone(),
    })
}
