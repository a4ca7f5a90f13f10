//! Manhattan-grid mobility.
//!
//! `grid_rows` horizontal and `grid_cols` vertical roads are spread evenly
//! across the area. Vehicles drive at constant speed along a road, may turn
//! at intersections, and wrap around at the area edges. Traffic keeps to the
//! right of the road centre line by `lane_offset_m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityParams {
    /// Number of horizontal (east-west) roads.
    pub grid_rows: usize,
    /// Number of vertical (north-south) roads.
    pub grid_cols: usize,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    /// Chance of turning when crossing an intersection.
    pub turn_probability: f64,
    pub lane_offset_m: f64,
    /// When false every road is one-way (east- or northbound).
    pub bidirectional: bool,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            grid_rows: 4,
            grid_cols: 5,
            speed_min_mps: 1.0,
            speed_max_mps: 2.0,
            turn_probability: 0.25,
            lane_offset_m: 2.0,
            bidirectional: true,
        }
    }
}

/// Kinematic snapshot of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleAgent {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub speed_mps: f64,
    /// Compass heading, 0 = +y, 90 = +x.
    pub heading_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// Runs along x at a fixed y.
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy)]
struct RoadState {
    axis: Axis,
    road: usize,
    /// Centre-line coordinate along the road.
    along: f64,
    /// +1 towards increasing coordinate.
    dir: f64,
    speed: f64,
}

struct Grid {
    width: f64,
    height: f64,
    rows: Vec<f64>,
    cols: Vec<f64>,
    lane_offset: f64,
    bidirectional: bool,
}

impl Grid {
    fn new(width: f64, height: f64, p: &MobilityParams) -> Self {
        let spread = |n: usize, extent: f64| (0..n).map(|i| (i as f64 + 0.5) * extent / n as f64).collect();
        Grid {
            width,
            height,
            rows: spread(p.grid_rows, height),
            cols: spread(p.grid_cols, width),
            lane_offset: p.lane_offset_m,
            bidirectional: p.bidirectional,
        }
    }

    fn extent(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.width,
            Axis::Vertical => self.height,
        }
    }

    /// Crossing coordinates along a road of the given axis.
    fn crossings(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::Horizontal => &self.cols,
            Axis::Vertical => &self.rows,
        }
    }

    fn agent(&self, id: u32, s: &RoadState) -> VehicleAgent {
        // right-hand traffic: offset to the right of the direction of travel
        let (x, y, heading) = match s.axis {
            Axis::Horizontal => {
                let y = self.rows[s.road] - s.dir * self.lane_offset;
                (s.along, y, if s.dir > 0.0 { 90.0 } else { 270.0 })
            }
            Axis::Vertical => {
                let x = self.cols[s.road] + s.dir * self.lane_offset;
                (x, s.along, if s.dir > 0.0 { 0.0 } else { 180.0 })
            }
        };
        VehicleAgent {
            id,
            x: x.rem_euclid(self.width),
            y: y.rem_euclid(self.height),
            speed_mps: s.speed,
            heading_deg: heading,
        }
    }

    fn advance(&self, s: &mut RoadState, dt: f64, turn_probability: f64, rng: &mut ChaCha8Rng) {
        let mut remaining = s.speed * dt;
        while remaining > 0.0 {
            let extent = self.extent(s.axis);
            let next = next_crossing(self.crossings(s.axis), s.along, s.dir, extent);
            let gap = match next {
                Some(c) => (c - s.along) * s.dir,
                None => f64::INFINITY,
            };
            if gap > remaining {
                s.along = (s.along + s.dir * remaining).rem_euclid(extent);
                return;
            }
            let crossing = next.expect("finite gap implies a crossing");
            remaining -= gap;
            s.along = crossing.rem_euclid(extent);
            if rng.gen_bool(turn_probability) {
                let (new_axis, new_road, new_along) = match s.axis {
                    Axis::Horizontal => (Axis::Vertical, index_of(&self.cols, s.along), self.rows[s.road]),
                    Axis::Vertical => (Axis::Horizontal, index_of(&self.rows, s.along), self.cols[s.road]),
                };
                let dir = if self.bidirectional && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                *s = RoadState {
                    axis: new_axis,
                    road: new_road,
                    along: new_along,
                    dir,
                    speed: s.speed,
                };
            }
        }
    }
}

fn index_of(coords: &[f64], value: f64) -> usize {
    coords
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - value).abs().total_cmp(&(b.1 - value).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Next crossing strictly ahead, unwrapped past the area edge if needed.
fn next_crossing(crossings: &[f64], along: f64, dir: f64, extent: f64) -> Option<f64> {
    if crossings.is_empty() {
        return None;
    }
    if dir > 0.0 {
        crossings
            .iter()
            .copied()
            .find(|&c| c > along)
            .or_else(|| Some(crossings[0] + extent))
    } else {
        crossings
            .iter()
            .rev()
            .copied()
            .find(|&c| c < along)
            .or_else(|| Some(crossings[crossings.len() - 1] - extent))
    }
}

/// Sampled trajectories: `samples[k][i]` is vehicle `i` at time `k * step_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub step_s: f64,
    pub samples: Vec<Vec<VehicleAgent>>,
}

impl Trajectories {
    pub fn vehicle_count(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Snapshot index in effect at `t` seconds.
    pub fn step_at(&self, t: f64) -> usize {
        ((t / self.step_s).floor().max(0.0) as usize).min(self.samples.len().saturating_sub(1))
    }

    pub fn at(&self, t: f64) -> &[VehicleAgent] {
        &self.samples[self.step_at(t)]
    }
}

/// Places `count` vehicles on the grid and samples their motion for `duration_s`.
pub fn generate_mobility(
    params: &MobilityParams,
    area: (f64, f64),
    count: usize,
    duration_s: f64,
    step_s: f64,
    seed: u64,
) -> Trajectories {
    let grid = Grid::new(area.0, area.1, params);
    let steps = (duration_s / step_s).ceil() as usize + 1;
    if count == 0 || (grid.rows.is_empty() && grid.cols.is_empty()) {
        return Trajectories {
            step_s,
            samples: vec![Vec::new(); steps],
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_len = grid.rows.len() as f64 * grid.width;
    let v_len = grid.cols.len() as f64 * grid.height;
    let mut states: Vec<RoadState> = (0..count)
        .map(|_| {
            let pick = rng.gen_range(0.0..h_len + v_len);
            let (axis, road, along) = if pick < h_len {
                let road = (pick / grid.width) as usize;
                (Axis::Horizontal, road.min(grid.rows.len() - 1), pick - road as f64 * grid.width)
            } else {
                let p = pick - h_len;
                let road = (p / grid.height) as usize;
                (Axis::Vertical, road.min(grid.cols.len() - 1), p - road as f64 * grid.height)
            };
            let dir = if !params.bidirectional || rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let speed = if params.speed_max_mps > params.speed_min_mps {
                rng.gen_range(params.speed_min_mps..=params.speed_max_mps)
            } else {
                params.speed_min_mps
            };
            RoadState {
                axis,
                road,
                along,
                dir,
                speed,
            }
        })
        .collect();

    let turn_p = params.turn_probability.clamp(0.0, 1.0);
    let mut samples = Vec::with_capacity(steps);
    for k in 0..steps {
        if k > 0 {
            for s in states.iter_mut() {
                grid.advance(s, step_s, turn_p, &mut rng);
            }
        }
        samples.push(
            states
                .iter()
                .enumerate()
                .map(|(i, s)| grid.agent(i as u32, s))
                .collect(),
        );
    }
    Trajectories { step_s, samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_vehicles() {
        let t = generate_mobility(&MobilityParams::default(), (4000.0, 5000.0), 0, 10.0, 0.1, 1);
        assert_eq!(t.vehicle_count(), 0);
    }

    #[test]
    fn single_one_way_lane_has_one_heading() {
        let p = MobilityParams {
            grid_rows: 1,
            grid_cols: 0,
            bidirectional: false,
            ..Default::default()
        };
        let t = generate_mobility(&p, (1000.0, 1000.0), 20, 30.0, 0.1, 7);
        for snap in &t.samples {
            assert!(snap.iter().all(|a| a.heading_deg == 90.0));
            assert!(snap.iter().all(|a| (a.y - (500.0 - 2.0)).abs() < 1e-9));
        }
    }

    #[test]
    fn next_crossing_wraps() {
        let c = [100.0, 300.0];
        assert_eq!(next_crossing(&c, 50.0, 1.0, 400.0), Some(100.0));
        assert_eq!(next_crossing(&c, 350.0, 1.0, 400.0), Some(500.0));
        assert_eq!(next_crossing(&c, 50.0, -1.0, 400.0), Some(-100.0));
        assert_eq!(next_crossing(&[], 50.0, 1.0, 400.0), None);
    }

    #[test]
    fn turning_vehicles_stay_on_roads() {
        let p = MobilityParams {
            grid_rows: 3,
            grid_cols: 3,
            speed_min_mps: 20.0,
            speed_max_mps: 30.0,
            turn_probability: 0.5,
            ..Default::default()
        };
        let area = (600.0, 600.0);
        let t = generate_mobility(&p, area, 30, 60.0, 0.1, 3);
        let roads = [100.0, 300.0, 500.0];
        let on_lane = |v: f64| roads.iter().any(|r| ((v - r).abs() - 2.0).abs() < 1e-6);
        let mut headings = std::collections::HashSet::new();
        for snap in &t.samples {
            for a in snap {
                match a.heading_deg as u32 {
                    90 | 270 => assert!(on_lane(a.y), "{a:?}"),
                    0 | 180 => assert!(on_lane(a.x), "{a:?}"),
                    _ => panic!("heading {a:?}"),
                }
                headings.insert(a.heading_deg as u32);
            }
        }
        assert_eq!(headings.len(), 4);
    }

    #[test]
    fn seeded_and_sampled_on_step() {
        let p = MobilityParams::default();
        let a = generate_mobility(&p, (4000.0, 5000.0), 15, 5.0, 0.1, 9);
        let b = generate_mobility(&p, (4000.0, 5000.0), 15, 5.0, 0.1, 9);
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 51);
        assert_eq!(a.step_at(0.099), 0);
        assert_eq!(a.step_at(0.1), 1);
        assert_eq!(a.step_at(99.0), 50);
    }
}
