//! C ABI for `cpfilter`.
//!
//! Every fallible function returns a [`CpfStatus`]; on failure a message is
//! kept per thread and can be read with [`cpf_last_error`]. Handles are
//! opaque and released with their matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cpfilter::cli::ScenarioFile;
use cpfilter::cmr::{decide, CmrConfig, FilterKind, Position, ReceiverState, TransmitterInfo};
use cpfilter::informativeness::{decayed, FeatureTuple};
use cpfilter::metric_learn::{fitness_score, CategoryCode, FeatureRanges, FitnessMatrix};
use cpfilter::netsim::{run_simulation, write_cdf_csv, write_metrics_csv, SimMetrics};
use cpfilter::sorting::weighted_fitness_sort;
use cpfilter::vdu_codec::{
    decode_packet, encode_packet, CmrPacket, DetectedObject, GpsFix, ImuBlock, MsgType, Vdu, MAX_OBJECTS,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Codec = 5,
    BufferTooSmall = 6,
    Simulation = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpfFilter {
    Cmr = 0,
    HopDis = 1,
    Hop = 2,
}

impl From<CpfFilter> for FilterKind {
    fn from(f: CpfFilter) -> Self {
        match f {
            CpfFilter::Cmr => FilterKind::Cmr,
            CpfFilter::HopDis => FilterKind::HopDis,
            CpfFilter::Hop => FilterKind::Hop,
        }
    }
}

/// Raw attributes of one detected object.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpfFeatures {
    /// Distance in meters.
    pub d: f64,
    /// Closing speed in m/s.
    pub v: f64,
    /// Heading relevance angle in degrees.
    pub r: f64,
    /// Category risk rank.
    pub c: f64,
}

impl From<CpfFeatures> for FeatureTuple {
    fn from(f: CpfFeatures) -> Self {
        FeatureTuple::new(f.d, f.v, f.r, f.c)
    }
}

/// Wire-level object record.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CpfObject {
    pub id: u16,
    pub position_x: u8,
    pub position_y: u8,
    pub velocity: u8,
    pub distance: u8,
    /// Category code 0..=8.
    pub label: u8,
    pub confidence: u8,
}

/// Everything in a framed packet except the objects.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CpfPacketHeader {
    pub ttl: u8,
    /// 0 = safety, 1 = non-safety.
    pub msg_type: u8,
    pub timestamp: u16,
    /// Degrees times 1e5.
    pub lat: i32,
    pub lon: i32,
    /// cm/s.
    pub velocity: i16,
    /// Hundredths of a degree, below 36000.
    pub direction: u16,
    pub category: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpfPosition {
    /// When true `a`/`b` are latitude/longitude in degrees, otherwise planar x/y in meters.
    pub geodetic: bool,
    pub a: f64,
    pub b: f64,
}

impl From<CpfPosition> for Position {
    fn from(p: CpfPosition) -> Self {
        if p.geodetic {
            Position::Geodetic { lat: p.a, lon: p.b }
        } else {
            Position::Planar { x: p.a, y: p.b }
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpfCmrConfig {
    pub ttl_initial: u8,
    pub direction_threshold_deg: f64,
    pub distance_threshold_m: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpfVerdict {
    /// 1 = forward and process, 0 = drop.
    pub forward: u8,
    /// Decremented hop budget, may be -1.
    pub ttl: i16,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CpfVehicleMetrics {
    pub id: u32,
    pub generated: u64,
    pub originated: u64,
    pub forwarded: u64,
    pub received: u64,
    pub filtered: u64,
    pub own_echoes: u64,
    pub lost: u64,
    pub sensed: u64,
    pub busy_time_s: f64,
}

/// Loaded fitness matrix.
pub struct CpfMatrix(FitnessMatrix);

/// Finished simulation run.
pub struct CpfSimResult(SimMetrics);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CpfStatus, String);

impl Failure {
    fn new(status: CpfStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

/// `e` followed by each of its sources.
fn describe(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut cur = e.source();
    while let Some(s) = cur {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        cur = s.source();
    }
    msg
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CpfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CpfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CpfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(CpfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(CpfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else {
        Ok(std::slice::from_raw_parts(deref(p, name)?, len))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        Ok(&mut [])
    } else {
        Ok(std::slice::from_raw_parts_mut(out(p, name)?, len))
    }
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CpfStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CpfStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cpf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cpf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Decayed message informativeness for a message whose best object scored `base`.
#[no_mangle]
pub extern "C" fn cpf_decay(base: f64, ttl_remaining: u32, ttl_initial: u32, rate: f64, elapsed_s: f64) -> f64 {
    decayed(base, ttl_remaining, ttl_initial, rate, elapsed_s)
}

/// Identity matrix over the default attribute ranges.
#[no_mangle]
pub unsafe extern "C" fn cpf_matrix_identity(out_matrix: *mut *mut CpfMatrix) -> CpfStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        *slot = Box::into_raw(Box::new(CpfMatrix(FitnessMatrix::identity(FeatureRanges::default()))));
        Ok(())
    })
}

/// Loads a matrix file written by `cpfilter train`.
#[no_mangle]
pub unsafe extern "C" fn cpf_matrix_load(path: *const c_char, out_matrix: *mut *mut CpfMatrix) -> CpfStatus {
    guard(|| {
        let slot = out(out_matrix, "out_matrix")?;
        let path = string(path, "path")?;
        let fm = FitnessMatrix::load(path).map_err(|e| {
            let status = match e {
                cpfilter::metric_learn::MatrixFileError::Io { .. } => CpfStatus::Io,
                _ => CpfStatus::Parse,
            };
            Failure::new(status, describe(&e))
        })?;
        *slot = Box::into_raw(Box::new(CpfMatrix(fm)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cpf_matrix_free(matrix: *mut CpfMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Normalized fitness in `[0, 1]` of one object.
#[no_mangle]
pub unsafe extern "C" fn cpf_matrix_score(
    matrix: *const CpfMatrix,
    features: *const CpfFeatures,
    out_score: *mut f64,
) -> CpfStatus {
    guard(|| {
        let fm = &deref(matrix, "matrix")?.0;
        let f: FeatureTuple = (*deref(features, "features")?).into();
        if !f.is_finite() {
            return Err(Failure::new(CpfStatus::InvalidArgument, "non-finite feature"));
        }
        *out(out_score, "out_score")? = fitness_score(&f, fm);
        Ok(())
    })
}

/// Ranks `count` objects by descending fitness.
///
/// `out_indices` receives the input positions in rank order. `out_scores`
/// may be null; otherwise it receives the normalized score of each ranked object.
#[no_mangle]
pub unsafe extern "C" fn cpf_rank(
    matrix: *const CpfMatrix,
    features: *const CpfFeatures,
    count: usize,
    out_indices: *mut usize,
    out_scores: *mut f64,
) -> CpfStatus {
    guard(|| {
        let fm = &deref(matrix, "matrix")?.0;
        let input = slice(features, count, "features")?;
        let tuples: Vec<FeatureTuple> = input.iter().map(|&f| f.into()).collect();
        let ranked = weighted_fitness_sort(&tuples, fm).map_err(|e| Failure::new(CpfStatus::InvalidArgument, e))?;
        let idx = slice_mut(out_indices, count, "out_indices")?;
        for (slot, r) in idx.iter_mut().zip(&ranked) {
            *slot = r.index;
        }
        if !out_scores.is_null() {
            let scores = slice_mut(out_scores, count, "out_scores")?;
            for (slot, r) in scores.iter_mut().zip(&ranked) {
                *slot = fitness_score(&tuples[r.index], fm);
            }
        }
        Ok(())
    })
}

/// Applies a forwarding filter to a received frame.
#[no_mangle]
pub unsafe extern "C" fn cpf_route_decide(
    filter: CpfFilter,
    tx_ttl: u8,
    tx_heading_deg: f64,
    tx_position: CpfPosition,
    rx_heading_deg: f64,
    rx_position: CpfPosition,
    config: *const CpfCmrConfig,
    out_verdict: *mut CpfVerdict,
) -> CpfStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let cfg = CmrConfig {
            ttl_initial: c.ttl_initial,
            direction_threshold_deg: c.direction_threshold_deg,
            distance_threshold_m: c.distance_threshold_m,
        };
        cfg.validate().map_err(|e| Failure::new(CpfStatus::InvalidArgument, e))?;
        let tx = TransmitterInfo {
            ttl: tx_ttl,
            heading_deg: tx_heading_deg,
            position: tx_position.into(),
        };
        let rx = ReceiverState {
            heading_deg: rx_heading_deg,
            position: rx_position.into(),
        };
        let v = decide(filter.into(), &tx, &rx, &cfg);
        *out(out_verdict, "out_verdict")? = CpfVerdict {
            forward: v.forwards() as u8,
            ttl: v.ttl,
        };
        Ok(())
    })
}

/// Default CMR thresholds.
#[no_mangle]
pub extern "C" fn cpf_cmr_config_default() -> CpfCmrConfig {
    let d = CmrConfig::default();
    CpfCmrConfig {
        ttl_initial: d.ttl_initial,
        direction_threshold_deg: d.direction_threshold_deg,
        distance_threshold_m: d.distance_threshold_m,
    }
}

fn to_packet(h: &CpfPacketHeader, objects: &[CpfObject]) -> Result<CmrPacket, Failure> {
    let msg_type = match h.msg_type {
        0 => MsgType::Safety,
        1 => MsgType::NonSafety,
        t => return Err(Failure::new(CpfStatus::InvalidArgument, format!("msg_type {t}"))),
    };
    let objects = objects
        .iter()
        .map(|o| {
            let label = CategoryCode::from_code(o.label)
                .ok_or_else(|| Failure::new(CpfStatus::InvalidArgument, format!("label {}", o.label)))?;
            Ok(DetectedObject {
                id: o.id,
                position_x: o.position_x,
                position_y: o.position_y,
                velocity: o.velocity,
                distance: o.distance,
                label,
                confidence: o.confidence,
            })
        })
        .collect::<Result<_, Failure>>()?;
    Ok(CmrPacket {
        ttl: h.ttl,
        payload: Vdu {
            msg_type,
            timestamp: h.timestamp,
            gps: GpsFix { lat: h.lat, lon: h.lon },
            imu: ImuBlock {
                velocity: h.velocity,
                direction: h.direction,
                category: h.category,
            },
            objects,
        },
    })
}

/// Largest framed packet in bytes.
#[no_mangle]
pub extern "C" fn cpf_packet_max_len() -> usize {
    23 + 8 * MAX_OBJECTS
}

/// Encodes a framed packet into `buf`.
///
/// `out_len` always receives the required size, so a call with a short
/// buffer returns `BufferTooSmall` and reports how much space is needed.
#[no_mangle]
pub unsafe extern "C" fn cpf_packet_encode(
    header: *const CpfPacketHeader,
    objects: *const CpfObject,
    object_count: usize,
    buf: *mut u8,
    buf_len: usize,
    out_len: *mut usize,
) -> CpfStatus {
    guard(|| {
        let h = deref(header, "header")?;
        let objs = slice(objects, object_count, "objects")?;
        let len_slot = out(out_len, "out_len")?;
        let pkt = to_packet(h, objs)?;
        let bytes = encode_packet(&pkt).map_err(|e| Failure::new(CpfStatus::Codec, e))?;
        *len_slot = bytes.len();
        if bytes.len() > buf_len {
            return Err(Failure::new(
                CpfStatus::BufferTooSmall,
                format!("need {} bytes, buffer has {buf_len}", bytes.len()),
            ));
        }
        slice_mut(buf, bytes.len(), "buf")?.copy_from_slice(&bytes);
        Ok(())
    })
}

/// Decodes a framed packet.
///
/// `out_object_count` always receives the number of objects in the frame;
/// if it exceeds `object_capacity` the call fails with `BufferTooSmall`.
#[no_mangle]
pub unsafe extern "C" fn cpf_packet_decode(
    bytes: *const u8,
    len: usize,
    out_header: *mut CpfPacketHeader,
    out_objects: *mut CpfObject,
    object_capacity: usize,
    out_object_count: *mut usize,
) -> CpfStatus {
    guard(|| {
        let data = slice(bytes, len, "bytes")?;
        let hdr = out(out_header, "out_header")?;
        let count = out(out_object_count, "out_object_count")?;
        let pkt = decode_packet(data).map_err(|e| Failure::new(CpfStatus::Codec, e))?;
        let v = &pkt.payload;
        *count = v.objects.len();
        if v.objects.len() > object_capacity {
            return Err(Failure::new(
                CpfStatus::BufferTooSmall,
                format!("frame has {} objects, capacity {object_capacity}", v.objects.len()),
            ));
        }
        *hdr = CpfPacketHeader {
            ttl: pkt.ttl,
            msg_type: matches!(v.msg_type, MsgType::NonSafety) as u8,
            timestamp: v.timestamp,
            lat: v.gps.lat,
            lon: v.gps.lon,
            velocity: v.imu.velocity,
            direction: v.imu.direction,
            category: v.imu.category,
        };
        let slots = slice_mut(out_objects, v.objects.len(), "out_objects")?;
        for (slot, o) in slots.iter_mut().zip(&v.objects) {
            *slot = CpfObject {
                id: o.id,
                position_x: o.position_x,
                position_y: o.position_y,
                velocity: o.velocity,
                distance: o.distance,
                label: o.label.code(),
                confidence: o.confidence,
            };
        }
        Ok(())
    })
}

/// Runs one simulation described by TOML scenario text (same keys as the CLI
/// scenario file; `filters` and `output_dir` are ignored).
#[no_mangle]
pub unsafe extern "C" fn cpf_sim_run(
    scenario_toml: *const c_char,
    filter: CpfFilter,
    out_result: *mut *mut CpfSimResult,
) -> CpfStatus {
    guard(|| {
        let slot = out(out_result, "out_result")?;
        let text = string(scenario_toml, "scenario_toml")?;
        let scenario = ScenarioFile::parse(text).map_err(|e| Failure::new(CpfStatus::Parse, e))?;
        let metrics = run_simulation(&scenario.sim_config(filter.into()))
            .map_err(|e| Failure::new(CpfStatus::Simulation, e))?;
        *slot = Box::into_raw(Box::new(CpfSimResult(metrics)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cpf_sim_free(result: *mut CpfSimResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of vehicles in a finished run, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn cpf_sim_vehicle_count(result: *const CpfSimResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.vehicles.len())
}

#[no_mangle]
pub unsafe extern "C" fn cpf_sim_vehicle(
    result: *const CpfSimResult,
    index: usize,
    out_metrics: *mut CpfVehicleMetrics,
) -> CpfStatus {
    guard(|| {
        let m = &deref(result, "result")?.0;
        let v = m.vehicles.get(index).ok_or_else(|| {
            Failure::new(
                CpfStatus::InvalidArgument,
                format!("vehicle index {index} out of range ({} vehicles)", m.vehicles.len()),
            )
        })?;
        *out(out_metrics, "out_metrics")? = CpfVehicleMetrics {
            id: v.id,
            generated: v.generated(),
            originated: v.originated,
            forwarded: v.forwarded,
            received: v.received,
            filtered: v.filtered,
            own_echoes: v.own_echoes,
            lost: v.lost,
            sensed: v.sensed,
            busy_time_s: v.busy_time_s,
        };
        Ok(())
    })
}

/// Mean received frames and mean busy time over all vehicles.
#[no_mangle]
pub unsafe extern "C" fn cpf_sim_summary(
    result: *const CpfSimResult,
    out_mean_received: *mut f64,
    out_mean_busy_time_s: *mut f64,
) -> CpfStatus {
    guard(|| {
        let m = &deref(result, "result")?.0;
        *out(out_mean_received, "out_mean_received")? = m.mean_received();
        *out(out_mean_busy_time_s, "out_mean_busy_time_s")? = m.mean_busy_time_s();
        Ok(())
    })
}

/// Writes the per-vehicle CSV and/or the CDF CSV; either path may be null.
#[no_mangle]
pub unsafe extern "C" fn cpf_sim_write_csv(
    result: *const CpfSimResult,
    metrics_path: *const c_char,
    cdf_path: *const c_char,
) -> CpfStatus {
    guard(|| {
        let m = &deref(result, "result")?.0;
        let open = |p: *const c_char, name: &str| -> Result<Option<BufWriter<File>>, Failure> {
            if p.is_null() {
                return Ok(None);
            }
            let path = string(p, name)?;
            File::create(path)
                .map(|f| Some(BufWriter::new(f)))
                .map_err(|e| Failure::new(CpfStatus::Io, format!("{path}: {e}")))
        };
        let io = |e: std::io::Error| Failure::new(CpfStatus::Io, e);
        if let Some(mut w) = open(metrics_path, "metrics_path")? {
            write_metrics_csv(m, &mut w).and_then(|_| w.flush()).map_err(io)?;
        }
        if let Some(mut w) = open(cdf_path, "cdf_path")? {
            write_cdf_csv(m, &mut w).and_then(|_| w.flush()).map_err(io)?;
        }
        Ok(())
    })
}
