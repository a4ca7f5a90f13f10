//! Object, message and vehicle level informativeness.
//!
//! An object's informativeness is its normalized fitness score. A message is
//! as informative as its best object, decayed by remaining hop budget and
//! age. A vehicle conveys the sum over the messages it selects.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vdu_codec::DetectedObject;

/// Default number of objects shown to a driver.
pub const DEFAULT_TOP_L: usize = 7;

/// The four raw informativeness attributes of a perceived object.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureTuple {
    /// Distance to the receiver in meters.
    pub d: f64,
    /// Closing speed in m/s, positive when approaching.
    pub v: f64,
    /// Heading-relevance angle in degrees, 0 = dead ahead on the receiver's path.
    pub r: f64,
    /// Category risk rank; higher is more vulnerable.
    pub c: f64,
}

impl FeatureTuple {
    pub const fn new(d: f64, v: f64, r: f64, c: f64) -> Self {
        FeatureTuple { d, v, r, c }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.d, self.v, self.r, self.c]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FeatureTuple::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }

    /// Checks the raw-domain invariants (`d >= 0`, `0 <= r <= 180`).
    pub fn is_valid(&self) -> bool {
        self.is_finite() && self.d >= 0.0 && (0.0..=180.0).contains(&self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Per-second decay rate in `[0, 1)`.
    pub rate: f64,
    /// Initial hop budget.
    pub ttl_initial: u32,
    /// Current time in seconds.
    pub now: f64,
}

impl DecayParams {
    pub fn new(rate: f64, ttl_initial: u32, now: f64) -> Self {
        DecayParams {
            rate,
            ttl_initial,
            now,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredObject {
    pub object: DetectedObject,
    pub features: FeatureTuple,
    /// Normalized informativeness in `[0, 1]`.
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMessage {
    pub message_id: u64,
    pub objects: Vec<ScoredObject>,
    pub ttl_remaining: u32,
    /// Creation time in seconds.
    pub created: f64,
    base: f64,
}

impl ScoredMessage {
    pub fn new(message_id: u64, objects: Vec<ScoredObject>, ttl_remaining: u32, created: f64) -> Self {
        let base = objects.iter().map(|o| o.fitness).fold(0.0, f64::max);
        ScoredMessage {
            message_id,
            objects,
            ttl_remaining,
            created,
            base,
        }
    }

    /// Max fitness over contained objects, 0 when empty.
    pub fn base_informativeness(&self) -> f64 {
        self.base
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InformativenessError {
    #[error("unknown message id {0}")]
    UnknownMessageId(u64),
}

/// Decayed message informativeness.
///
/// `(base * ttl/ttl_initial * (1 - rate)) ^ (now - created)`, clamped to
/// `[0, 1]`. The whole product is raised to the age in seconds.
pub fn message_informativeness(m: &ScoredMessage, p: &DecayParams) -> f64 {
    decayed(
        m.base_informativeness(),
        m.ttl_remaining,
        p.ttl_initial,
        p.rate,
        p.now - m.created,
    )
}

/// Scalar form of [`message_informativeness`].
pub fn decayed(base: f64, ttl_remaining: u32, ttl_initial: u32, rate: f64, elapsed: f64) -> f64 {
    if ttl_remaining == 0 || ttl_initial == 0 || base <= 0.0 {
        return 0.0;
    }
    let factor = base.min(1.0) * (ttl_remaining as f64 / ttl_initial as f64) * (1.0 - rate);
    factor.max(0.0).powf(elapsed.max(0.0)).clamp(0.0, 1.0)
}

/// Sum of decayed informativeness over the selected messages.
pub fn vehicle_informativeness(
    messages: &[ScoredMessage],
    selection: &HashSet<u64>,
    p: &DecayParams,
) -> Result<f64, InformativenessError> {
    if let Some(&missing) = selection
        .iter()
        .find(|id| !messages.iter().any(|m| m.message_id == **id))
    {
        return Err(InformativenessError::UnknownMessageId(missing));
    }
    Ok(messages
        .iter()
        .filter(|m| selection.contains(&m.message_id))
        .map(|m| message_informativeness(m, p))
        .sum())
}

/// Total order used for display: fitness descending, then nearer, then lower id.
pub fn display_order(a: &ScoredObject, b: &ScoredObject) -> std::cmp::Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then(a.features.d.total_cmp(&b.features.d))
        .then(a.object.id.cmp(&b.object.id))
}

/// The `l` highest-fitness objects in display order.
///
/// Picking the top `l` maximizes the summed fitness under an `l`-object cap
/// because every term is independent and nonnegative.
pub fn select_top_l(objects: &[ScoredObject], l: usize) -> Vec<ScoredObject> {
    if l == 0 {
        return Vec::new();
    }
    let mut out = objects.to_vec();
    if out.len() > l {
        out.select_nth_unstable_by(l - 1, display_order);
        out.truncate(l);
    }
    out.sort_by(display_order);
    out
}
