//! Event loop.
//!
//! Time is kept in integer nanoseconds. Beacons and forwards are scheduled on
//! whole milliseconds; frame ends fall wherever the airtime puts them. Each
//! vehicle transmits one frame at a time, queueing anything that becomes ready
//! while it is on air.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{SimMetrics, VehicleMetrics};
use super::mobility::{generate_mobility, Trajectories, VehicleAgent};
use super::radio::can_sense;
use super::{SimConfig, SimError};
use crate::cmr::{decide, Position, ReceiverState, TransmitterInfo};
use crate::metric_learn::CategoryCode;
use crate::vdu_codec::{CmrPacket, DetectedObject, GpsFix, ImuBlock, MsgType, Vdu};

const NS_PER_MS: u64 = 1_000_000;
const NS_PER_S: f64 = 1e9;

/// Map origin for the GPS field of synthetic VDUs.
const ORIGIN_LAT: f64 = 51.5074;
const ORIGIN_LON: f64 = -0.1278;
const METERS_PER_DEG_LAT: f64 = 111_320.0;

const STREAM_PHASE: u64 = 1;
const STREAM_JITTER: u64 = 2;
const STREAM_OBJECTS: u64 = 3;

/// Routing view of a frame in flight. Originator state is what its VDU carries.
#[derive(Debug, Clone, Copy)]
struct Frame {
    origin: u32,
    ttl: u8,
    hops: u8,
    bytes: usize,
    heading_deg: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Beacon { vehicle: u32, k: u64 },
    /// Frame ready to go; waits for the vehicle's transmitter.
    Ready { vehicle: u32, frame: Frame },
    TxStart { vehicle: u32, frame: Frame },
    RxEnd { receiver: u32, slot: u32, frame: Frame },
}

struct Event {
    time: u64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Pairs within link budget for one mobility snapshot.
struct Neighbors {
    step: usize,
    lists: Vec<Vec<u32>>,
}

impl Neighbors {
    fn compute(step: usize, agents: &[VehicleAgent], cfg: &SimConfig) -> Self {
        let n = agents.len();
        let mut lists = vec![Vec::new(); n];
        let cutoff = cfg.radio.cutoff_radius_m();
        let cell = cutoff.max(1.0);
        let nx = ((cfg.area_width_m / cell).ceil() as usize).max(1);
        let ny = ((cfg.area_height_m / cell).ceil() as usize).max(1);
        let cell_of = |a: &VehicleAgent| {
            let cx = ((a.x / cell) as usize).min(nx - 1);
            let cy = ((a.y / cell) as usize).min(ny - 1);
            (cx, cy)
        };
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        for a in agents {
            let (cx, cy) = cell_of(a);
            buckets[cy * nx + cx].push(a.id);
        }
        for a in agents {
            let (cx, cy) = cell_of(a);
            for gy in cy.saturating_sub(1)..=(cy + 1).min(ny - 1) {
                for gx in cx.saturating_sub(1)..=(cx + 1).min(nx - 1) {
                    for &j in &buckets[gy * nx + gx] {
                        // the link budget is symmetric; evaluate each pair once
                        if j <= a.id {
                            continue;
                        }
                        let b = &agents[j as usize];
                        if (a.x - b.x).hypot(a.y - b.y) > cutoff {
                            continue;
                        }
                        if can_sense(a, b, &cfg.radio) {
                            lists[a.id as usize].push(j);
                            lists[j as usize].push(a.id);
                        }
                    }
                }
            }
        }
        for l in lists.iter_mut() {
            l.sort_unstable();
        }
        Neighbors { step, lists }
    }
}

#[derive(Default)]
struct RadioState {
    tx_free_at: u64,
    /// Receptions in progress: (end, slot).
    active: Vec<(u64, u32)>,
    busy_until: u64,
    busy_ns: u64,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    traj: Trajectories,
    step_ns: u64,
    duration_ns: u64,
    heap: BinaryHeap<Event>,
    seq: u64,
    neighbors: Option<Neighbors>,
    radios: Vec<RadioState>,
    metrics: Vec<VehicleMetrics>,
    collided: Vec<bool>,
    free_slots: Vec<u32>,
    jitter_rng: ChaCha8Rng,
    object_rng: ChaCha8Rng,
    max_hops: u8,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn to_geodetic(x: f64, y: f64) -> GpsFix {
    let lat = ORIGIN_LAT + y / METERS_PER_DEG_LAT;
    let lon = ORIGIN_LON + x / (METERS_PER_DEG_LAT * ORIGIN_LAT.to_radians().cos());
    GpsFix::from_degrees(lat, lon)
}

fn synthetic_vdu(a: &VehicleAgent, t_ns: u64, objects: usize, rng: &mut ChaCha8Rng) -> Vdu {
    let objects = (0..objects)
        .map(|i| DetectedObject {
            id: i as u16,
            position_x: rng.gen(),
            position_y: rng.gen(),
            velocity: DetectedObject::quantize_velocity(rng.gen_range(-10.0..30.0)),
            distance: DetectedObject::quantize_distance(rng.gen_range(0.0..100.0)),
            label: CategoryCode::from_code(rng.gen_range(0..9)).unwrap_or(CategoryCode::Obstacle),
            confidence: rng.gen(),
        })
        .collect();
    Vdu {
        msg_type: MsgType::Safety,
        timestamp: ((t_ns / (100 * NS_PER_MS)) % 65536) as u16,
        gps: to_geodetic(a.x, a.y),
        imu: ImuBlock {
            velocity: ImuBlock::quantize_speed(a.speed_mps),
            direction: ImuBlock::quantize_heading(a.heading_deg),
            category: CategoryCode::Car.code(),
        },
        objects,
    }
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: u64, kind: Kind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn snapshot(&self, t: u64) -> usize {
        ((t / self.step_ns) as usize).min(self.traj.samples.len() - 1)
    }

    fn agent(&self, vehicle: u32, t: u64) -> VehicleAgent {
        self.traj.samples[self.snapshot(t)][vehicle as usize]
    }

    fn airtime_ns(&self, bytes: usize) -> u64 {
        (self.cfg.radio.airtime_s(bytes) * NS_PER_S).round() as u64
    }

    fn ready(&mut self, vehicle: u32, t: u64, frame: Frame) {
        let r = &mut self.radios[vehicle as usize];
        let start = t.max(r.tx_free_at);
        if start >= self.duration_ns {
            return;
        }
        let air = (self.cfg.radio.airtime_s(frame.bytes) * NS_PER_S).round() as u64;
        r.tx_free_at = start + air;
        self.push(start, Kind::TxStart { vehicle, frame });
    }

    fn beacon(&mut self, vehicle: u32, k: u64, t: u64) {
        let a = self.agent(vehicle, t);
        let packet = CmrPacket {
            ttl: self.cfg.cmr.ttl_initial,
            payload: synthetic_vdu(&a, t, self.cfg.objects_per_vdu, &mut self.object_rng),
        };
        let frame = Frame {
            origin: vehicle,
            ttl: packet.ttl,
            hops: 0,
            bytes: packet.encoded_len(),
            heading_deg: a.heading_deg,
            x: a.x,
            y: a.y,
        };
        self.ready(vehicle, t, frame);
        let period = self.beacon_period_ns();
        if k + 1 < self.beacon_count() {
            self.push(t + period, Kind::Beacon { vehicle, k: k + 1 });
        }
    }

    fn beacon_period_ns(&self) -> u64 {
        (1000.0 / self.cfg.beacon_rate_hz).floor() as u64 * NS_PER_MS
    }

    fn beacon_count(&self) -> u64 {
        (self.cfg.duration_s * self.cfg.beacon_rate_hz + 1e-9).floor() as u64
    }

    fn tx_start(&mut self, vehicle: u32, frame: Frame, t: u64) {
        let m = &mut self.metrics[vehicle as usize];
        if frame.hops == 0 {
            m.originated += 1;
        } else {
            m.forwarded += 1;
        }
        self.max_hops = self.max_hops.max(frame.hops);

        let step = self.snapshot(t);
        if self.neighbors.as_ref().is_none_or(|n| n.step != step) {
            self.neighbors = Some(Neighbors::compute(step, &self.traj.samples[step], self.cfg));
        }
        let end = t + self.airtime_ns(frame.bytes);
        let receivers = std::mem::take(&mut self.neighbors.as_mut().expect("computed above").lists[vehicle as usize]);
        for &rx in &receivers {
            let slot = match self.free_slots.pop() {
                Some(s) => {
                    self.collided[s as usize] = false;
                    s
                }
                None => {
                    self.collided.push(false);
                    (self.collided.len() - 1) as u32
                }
            };
            let radio = &mut self.radios[rx as usize];
            radio.active.retain(|&(e, _)| e > t);
            if !radio.active.is_empty() {
                self.collided[slot as usize] = true;
                for &(_, s) in &radio.active {
                    self.collided[s as usize] = true;
                }
            }
            radio.active.push((end, slot));

            let lo = t.max(radio.busy_until).min(self.duration_ns);
            let hi = end.min(self.duration_ns);
            radio.busy_ns += hi.saturating_sub(lo);
            radio.busy_until = radio.busy_until.max(end);

            self.metrics[rx as usize].sensed += 1;
            self.push(end, Kind::RxEnd { receiver: rx, slot, frame });
        }
        self.neighbors.as_mut().expect("computed above").lists[vehicle as usize] = receivers;
    }

    fn rx_end(&mut self, receiver: u32, slot: u32, frame: Frame, t: u64) {
        self.radios[receiver as usize].active.retain(|&(_, s)| s != slot);
        let collided = self.collided[slot as usize];
        self.free_slots.push(slot);
        let m = &mut self.metrics[receiver as usize];
        if collided {
            m.lost += 1;
            return;
        }
        if frame.origin == receiver {
            m.own_echoes += 1;
            return;
        }
        let me = self.agent(receiver, t);
        let tx = TransmitterInfo {
            ttl: frame.ttl,
            heading_deg: frame.heading_deg,
            position: Position::Planar { x: frame.x, y: frame.y },
        };
        let rx = ReceiverState {
            heading_deg: me.heading_deg,
            position: Position::Planar { x: me.x, y: me.y },
        };
        let verdict = decide(self.cfg.filter, &tx, &rx, &self.cfg.cmr);
        let m = &mut self.metrics[receiver as usize];
        if !verdict.forwards() {
            m.filtered += 1;
            return;
        }
        m.received += 1;
        let (lo, hi) = self.cfg.forward_jitter_ms;
        let jitter = self.jitter_rng.gen_range(lo..=hi) as u64;
        let at = t.div_ceil(NS_PER_MS) * NS_PER_MS + jitter * NS_PER_MS;
        let copy = Frame {
            ttl: verdict.ttl as u8,
            hops: frame.hops + 1,
            ..frame
        };
        self.push(at, Kind::Ready { vehicle: receiver, frame: copy });
    }

    fn new(cfg: &'a SimConfig, traj: Trajectories) -> Self {
        let n = traj.vehicle_count();
        Sim {
            cfg,
            step_ns: ((traj.step_s * NS_PER_S).round() as u64).max(1),
            traj,
            duration_ns: (cfg.duration_s * NS_PER_S).round() as u64,
            heap: BinaryHeap::new(),
            seq: 0,
            neighbors: None,
            radios: (0..n).map(|_| RadioState::default()).collect(),
            metrics: (0..n as u32)
                .map(|id| VehicleMetrics {
                    id,
                    ..Default::default()
                })
                .collect(),
            collided: Vec::new(),
            free_slots: Vec::new(),
            jitter_rng: stream(cfg.seed, STREAM_JITTER),
            object_rng: stream(cfg.seed, STREAM_OBJECTS),
            max_hops: 0,
        }
    }

    fn schedule_beacons(&mut self) {
        if self.beacon_count() == 0 {
            return;
        }
        let period_ms = self.beacon_period_ns() / NS_PER_MS;
        let mut phase_rng = stream(self.cfg.seed, STREAM_PHASE);
        for v in 0..self.metrics.len() as u32 {
            let phase = phase_rng.gen_range(0..period_ms.max(1));
            self.push(phase * NS_PER_MS, Kind::Beacon { vehicle: v, k: 0 });
        }
    }

    fn run(mut self) -> SimMetrics {
        while let Some(ev) = self.heap.pop() {
            let t = ev.time;
            match ev.kind {
                Kind::Beacon { vehicle, k } => self.beacon(vehicle, k, t),
                Kind::Ready { vehicle, frame } => self.ready(vehicle, t, frame),
                Kind::TxStart { vehicle, frame } => self.tx_start(vehicle, frame, t),
                Kind::RxEnd { receiver, slot, frame } => self.rx_end(receiver, slot, frame, t),
            }
        }
        for (m, r) in self.metrics.iter_mut().zip(&self.radios) {
            m.busy_time_s = r.busy_ns as f64 / NS_PER_S;
        }
        SimMetrics {
            filter: self.cfg.filter,
            seed: self.cfg.seed,
            duration_s: self.cfg.duration_s,
            vehicles: self.metrics,
            max_forward_hops: self.max_hops,
        }
    }
}

/// Runs one scenario to completion. Deterministic for a given config.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimMetrics, SimError> {
    cfg.validate()?;
    let traj = generate_mobility(
        &cfg.mobility,
        (cfg.area_width_m, cfg.area_height_m),
        cfg.vehicle_count,
        cfg.duration_s,
        cfg.mobility_step_s,
        cfg.seed,
    );
    Ok(run_with_trajectories(cfg, traj))
}

pub(crate) fn run_with_trajectories(cfg: &SimConfig, traj: Trajectories) -> SimMetrics {
    let mut sim = Sim::new(cfg, traj);
    sim.schedule_beacons();
    sim.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmr::FilterKind;
    use crate::vdu_codec::encode_packet;

    fn fixed(agents: Vec<VehicleAgent>, duration_s: f64) -> Trajectories {
        let steps = (duration_s / 0.1).ceil() as usize + 1;
        Trajectories {
            step_s: 0.1,
            samples: vec![agents; steps],
        }
    }

    fn parked(id: u32, x: f64, y: f64, heading_deg: f64) -> VehicleAgent {
        VehicleAgent {
            id,
            x,
            y,
            speed_mps: 0.0,
            heading_deg,
        }
    }

    #[test]
    fn lone_vehicle() {
        let cfg = SimConfig {
            vehicle_count: 1,
            ..Default::default()
        };
        let m = run_simulation(&cfg).unwrap();
        let v = m.vehicles[0];
        assert_eq!(v.generated(), 600);
        assert_eq!((v.received, v.lost, v.sensed), (0, 0, 0));
        assert_eq!(v.busy_time_s, 0.0);
    }

    #[test]
    fn head_to_tail_pair() {
        let cfg = SimConfig {
            vehicle_count: 2,
            ..Default::default()
        };
        let traj = fixed(vec![parked(0, 500.0, 500.0, 0.0), parked(1, 500.0, 550.0, 0.0)], cfg.duration_s);
        let m = run_with_trajectories(&cfg, traj);
        for v in &m.vehicles {
            assert_eq!(v.originated, 600);
            assert_eq!(v.received, 600);
            assert_eq!(v.lost, 0);
            assert_eq!(v.own_echoes, 600);
            assert_eq!(v.sensed, v.received + v.lost + v.filtered + v.own_echoes);
            assert!(v.busy_time_s > 0.0 && v.busy_time_s < cfg.duration_s);
        }
        assert_eq!(m.max_forward_hops, 1);
    }

    #[test]
    fn opposite_headings_are_filtered_by_cmr_only() {
        let agents = vec![parked(0, 500.0, 500.0, 0.0), parked(1, 500.0, 550.0, 180.0)];
        let run = |filter| {
            let cfg = SimConfig {
                vehicle_count: 2,
                duration_s: 5.0,
                filter,
                ..Default::default()
            };
            run_with_trajectories(&cfg, fixed(agents.clone(), cfg.duration_s))
        };
        let cmr = run(FilterKind::Cmr);
        assert!(cmr.vehicles.iter().all(|v| v.received == 0 && v.filtered == 50));
        let hd = run(FilterKind::HopDis);
        assert!(hd.vehicles.iter().all(|v| v.received == 50));
    }

    fn chain(cfg: &SimConfig) -> Trajectories {
        // 0 and 2 cannot hear each other; 1 sits between them
        let gap = cfg.radio.cutoff_radius_m() * 0.6;
        fixed(
            (0..3).map(|i| parked(i, 1000.0, 1000.0 + gap * i as f64, 0.0)).collect(),
            cfg.duration_s,
        )
    }

    fn frame_from(origin: u32, y: f64) -> Frame {
        Frame {
            origin,
            ttl: 1,
            hops: 0,
            bytes: 103,
            heading_deg: 0.0,
            x: 1000.0,
            y,
        }
    }

    #[test]
    fn hidden_terminals_collide_at_the_middle() {
        let cfg = SimConfig {
            vehicle_count: 3,
            duration_s: 1.0,
            filter: FilterKind::Hop,
            ..Default::default()
        };
        let mut sim = Sim::new(&cfg, chain(&cfg));
        sim.push(0, Kind::Ready { vehicle: 0, frame: frame_from(0, 1000.0) });
        // starts while the first frame is still on air
        sim.push(100_000, Kind::Ready { vehicle: 2, frame: frame_from(2, 1000.0) });
        let m = sim.run();
        let mid = m.vehicles[1];
        assert_eq!((mid.sensed, mid.lost, mid.received), (2, 2, 0));
        assert_eq!(m.total_generated(), 2);
        let air = cfg.radio.airtime_s(103);
        assert!((mid.busy_time_s - (air + 100e-6)).abs() < 1e-9);
    }

    #[test]
    fn back_to_back_frames_do_not_collide() {
        let cfg = SimConfig {
            vehicle_count: 3,
            duration_s: 1.0,
            filter: FilterKind::Hop,
            ..Default::default()
        };
        let mut sim = Sim::new(&cfg, chain(&cfg));
        let air = sim.airtime_ns(103);
        sim.push(0, Kind::Ready { vehicle: 0, frame: frame_from(0, 1000.0) });
        sim.push(air, Kind::Ready { vehicle: 2, frame: frame_from(2, 1000.0) });
        let m = sim.run();
        let mid = m.vehicles[1];
        assert_eq!((mid.sensed, mid.lost, mid.received), (2, 0, 2));
        // the middle relays both with an exhausted budget
        assert_eq!(mid.forwarded, 2);
        for end in [m.vehicles[0], m.vehicles[2]] {
            assert_eq!((end.own_echoes, end.filtered, end.received, end.forwarded), (1, 1, 0, 0));
        }
    }

    #[test]
    fn synthetic_vdu_encodes_to_frame_length() {
        let a = parked(0, 123.0, 456.0, 270.0);
        let mut rng = stream(5, STREAM_OBJECTS);
        let pkt = CmrPacket {
            ttl: 2,
            payload: synthetic_vdu(&a, 12_345 * NS_PER_MS, 10, &mut rng),
        };
        assert_eq!(encode_packet(&pkt).unwrap().len(), 103);
        assert_eq!(pkt.encoded_len(), 103);
        assert!((pkt.payload.imu.heading_deg() - 270.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_conserving() {
        let cfg = SimConfig {
            vehicle_count: 60,
            duration_s: 5.0,
            area_width_m: 1000.0,
            area_height_m: 1000.0,
            filter: FilterKind::Hop,
            seed: 11,
            ..Default::default()
        };
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.max_forward_hops <= cfg.cmr.ttl_initial);
        assert_eq!(a.total_originated(), 60 * 50);
        for v in &a.vehicles {
            assert_eq!(v.sensed, v.received + v.lost + v.filtered + v.own_echoes);
            assert!(v.busy_time_s <= cfg.duration_s);
        }
        assert!(a.total_forwarded() > 0);
    }
}
