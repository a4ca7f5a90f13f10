//! Binary layout of vehicular data units (VDUs) and their routed frames.
//!
//! All multi-byte fields are little-endian. A VDU is laid out as
//!
//! ```text
//! timestamp (2) | gps lat (4) | gps lon (4) | imu (12) | object (8) * n
//! ```
//!
//! and a routed frame prepends a single time-to-live byte. The IMU block is
//! `velocity i16 | direction u16 | category u8 | msg_type u8 | 6 zero bytes`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_learn::CategoryCode;

/// Fixed bytes preceding the object list.
pub const VDU_HEADER_LEN: usize = 22;
/// Bytes per encoded [`DetectedObject`].
pub const OBJECT_LEN: usize = 8;
/// Bytes per encoded [`ImuBlock`].
pub const IMU_LEN: usize = 12;
/// Upper bound on objects so a framed VDU stays under 300 bytes.
pub const MAX_OBJECTS: usize = 34;
/// Time-to-live header width.
pub const TTL_LEN: usize = 1;

const IMU_MSG_TYPE_OFFSET: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("frame is empty")]
    EmptyFrame,
    #[error("truncated frame: {len} bytes, need at least {VDU_HEADER_LEN}")]
    TruncatedFrame { len: usize },
    #[error("misaligned object section: {remainder} trailing bytes after {VDU_HEADER_LEN}-byte header")]
    MisalignedObjects { remainder: usize },
    #[error("object count {count} exceeds limit of {MAX_OBJECTS}")]
    ObjectCountExceeded { count: usize },
    #[error("invalid field {field}: {value}")]
    InvalidField { field: &'static str, value: u32 },
}

/// Message class carried in the IMU reserved space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgType {
    Safety,
    NonSafety,
}

impl MsgType {
    fn to_byte(self) -> u8 {
        match self {
            MsgType::Safety => 0,
            MsgType::NonSafety => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, CodecError> {
        match b {
            0 => Ok(MsgType::Safety),
            1 => Ok(MsgType::NonSafety),
            other => Err(CodecError::InvalidField {
                field: "msg_type",
                value: other as u32,
            }),
        }
    }
}

/// One perceived road object in quantized wire form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub id: u16,
    /// Quantized frame coordinate.
    pub position_x: u8,
    pub position_y: u8,
    /// Absolute speed in 0.5 m/s steps.
    pub velocity: u8,
    /// Range to the object in 1 m steps.
    pub distance: u8,
    pub label: CategoryCode,
    /// Detector confidence, 255 = 1.0.
    pub confidence: u8,
}

impl DetectedObject {
    pub const VELOCITY_STEP_MPS: f64 = 0.5;
    pub const DISTANCE_STEP_M: f64 = 1.0;

    pub fn velocity_mps(&self) -> f64 {
        self.velocity as f64 * Self::VELOCITY_STEP_MPS
    }

    pub fn distance_m(&self) -> f64 {
        self.distance as f64 * Self::DISTANCE_STEP_M
    }

    pub fn confidence_unit(&self) -> f64 {
        self.confidence as f64 / 255.0
    }

    /// Quantizes a speed in m/s, saturating at the byte range.
    pub fn quantize_velocity(mps: f64) -> u8 {
        (mps / Self::VELOCITY_STEP_MPS).round().clamp(0.0, 255.0) as u8
    }

    pub fn quantize_distance(m: f64) -> u8 {
        (m / Self::DISTANCE_STEP_M).round().clamp(0.0, 255.0) as u8
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.id.to_le_bytes());
        out.extend_from_slice(&[
            self.position_x,
            self.position_y,
            self.velocity,
            self.distance,
            self.label.code(),
            self.confidence,
        ]);
    }

    fn read(b: &[u8]) -> Result<Self, CodecError> {
        debug_assert_eq!(b.len(), OBJECT_LEN);
        let label = CategoryCode::from_code(b[6]).ok_or(CodecError::InvalidField {
            field: "label",
            value: b[6] as u32,
        })?;
        Ok(DetectedObject {
            id: u16::from_le_bytes([b[0], b[1]]),
            position_x: b[2],
            position_y: b[3],
            velocity: b[4],
            distance: b[5],
            label,
            confidence: b[7],
        })
    }
}

/// Sender kinematics. Occupies 12 bytes on the wire; the unused tail is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImuBlock {
    /// Speed in m/s x100.
    pub velocity: i16,
    /// Heading in 0.01 degree steps, `< 36000`.
    pub direction: u16,
    /// Sender vehicle class.
    pub category: u8,
}

impl ImuBlock {
    pub const DIRECTION_LIMIT: u16 = 36000;

    pub fn heading_deg(&self) -> f64 {
        self.direction as f64 / 100.0
    }

    pub fn speed_mps(&self) -> f64 {
        self.velocity as f64 / 100.0
    }

    /// Quantizes a heading, wrapping into `[0, 360)`.
    pub fn quantize_heading(deg: f64) -> u16 {
        let q = (deg.rem_euclid(360.0) * 100.0).round() as u32;
        (q % Self::DIRECTION_LIMIT as u32) as u16
    }

    pub fn quantize_speed(mps: f64) -> i16 {
        (mps * 100.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
    }
}

/// Geodetic fix in 1e-5 degree fixed point (about 1.1 m at the equator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GpsFix {
    pub lat: i32,
    pub lon: i32,
}

impl GpsFix {
    pub const SCALE: f64 = 1e5;

    pub fn from_degrees(lat: f64, lon: f64) -> Self {
        GpsFix {
            lat: (lat * Self::SCALE).round() as i32,
            lon: (lon * Self::SCALE).round() as i32,
        }
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat as f64 / Self::SCALE
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon as f64 / Self::SCALE
    }
}

/// Application payload: sender state plus its detected objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vdu {
    pub msg_type: MsgType,
    /// Truncated epoch time in deciseconds.
    pub timestamp: u16,
    pub gps: GpsFix,
    pub imu: ImuBlock,
    pub objects: Vec<DetectedObject>,
}

impl Vdu {
    pub fn encoded_len(&self) -> usize {
        VDU_HEADER_LEN + OBJECT_LEN * self.objects.len()
    }
}

/// A VDU framed with its remaining hop budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmrPacket {
    pub ttl: u8,
    pub payload: Vdu,
}

impl CmrPacket {
    pub fn encoded_len(&self) -> usize {
        TTL_LEN + self.payload.encoded_len()
    }
}

pub fn encode_vdu(v: &Vdu) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(v.encoded_len());
    write_vdu(v, &mut out)?;
    Ok(out)
}

fn write_vdu(v: &Vdu, out: &mut Vec<u8>) -> Result<(), CodecError> {
    if v.objects.len() > MAX_OBJECTS {
        return Err(CodecError::ObjectCountExceeded {
            count: v.objects.len(),
        });
    }
    if v.imu.direction >= ImuBlock::DIRECTION_LIMIT {
        return Err(CodecError::InvalidField {
            field: "direction",
            value: v.imu.direction as u32,
        });
    }
    out.extend_from_slice(&v.timestamp.to_le_bytes());
    out.extend_from_slice(&v.gps.lat.to_le_bytes());
    out.extend_from_slice(&v.gps.lon.to_le_bytes());

    let mut imu = [0u8; IMU_LEN];
    imu[0..2].copy_from_slice(&v.imu.velocity.to_le_bytes());
    imu[2..4].copy_from_slice(&v.imu.direction.to_le_bytes());
    imu[4] = v.imu.category;
    imu[IMU_MSG_TYPE_OFFSET] = v.msg_type.to_byte();
    out.extend_from_slice(&imu);

    for o in &v.objects {
        o.write(out);
    }
    Ok(())
}

pub fn decode_vdu(b: &[u8]) -> Result<Vdu, CodecError> {
    if b.len() < VDU_HEADER_LEN {
        return Err(CodecError::TruncatedFrame { len: b.len() });
    }
    let body = &b[VDU_HEADER_LEN..];
    let remainder = body.len() % OBJECT_LEN;
    if remainder != 0 {
        return Err(CodecError::MisalignedObjects { remainder });
    }
    let count = body.len() / OBJECT_LEN;
    if count > MAX_OBJECTS {
        return Err(CodecError::ObjectCountExceeded { count });
    }

    let le_i32 = |s: &[u8]| i32::from_le_bytes([s[0], s[1], s[2], s[3]]);
    let timestamp = u16::from_le_bytes([b[0], b[1]]);
    let gps = GpsFix {
        lat: le_i32(&b[2..6]),
        lon: le_i32(&b[6..10]),
    };

    let imu_bytes = &b[10..VDU_HEADER_LEN];
    let direction = u16::from_le_bytes([imu_bytes[2], imu_bytes[3]]);
    if direction >= ImuBlock::DIRECTION_LIMIT {
        return Err(CodecError::InvalidField {
            field: "direction",
            value: direction as u32,
        });
    }
    let msg_type = MsgType::from_byte(imu_bytes[IMU_MSG_TYPE_OFFSET])?;
    if let Some(&nz) = imu_bytes[IMU_MSG_TYPE_OFFSET + 1..]
        .iter()
        .find(|&&x| x != 0)
    {
        return Err(CodecError::InvalidField {
            field: "imu_reserved",
            value: nz as u32,
        });
    }
    let imu = ImuBlock {
        velocity: i16::from_le_bytes([imu_bytes[0], imu_bytes[1]]),
        direction,
        category: imu_bytes[4],
    };

    let objects = body
        .chunks_exact(OBJECT_LEN)
        .map(DetectedObject::read)
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Vdu {
        msg_type,
        timestamp,
        gps,
        imu,
        objects,
    })
}

pub fn encode_packet(p: &CmrPacket) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(p.encoded_len());
    out.push(p.ttl);
    write_vdu(&p.payload, &mut out)?;
    Ok(out)
}

pub fn decode_packet(b: &[u8]) -> Result<CmrPacket, CodecError> {
    let (&ttl, rest) = b.split_first().ok_or(CodecError::EmptyFrame)?;
    Ok(CmrPacket {
        ttl,
        payload: decode_vdu(rest)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vdu_with(n: usize) -> Vdu {
        Vdu {
            msg_type: MsgType::Safety,
            timestamp: 1234,
            gps: GpsFix::from_degrees(51.50735, -0.12776),
            imu: ImuBlock {
                velocity: 1388,
                direction: 9000,
                category: 1,
            },
            objects: (0..n)
                .map(|i| DetectedObject {
                    id: i as u16,
                    position_x: 10,
                    position_y: 20,
                    velocity: 30,
                    distance: 40,
                    label: CategoryCode::Car,
                    confidence: 200,
                })
                .collect(),
        }
    }

    #[test]
    fn ten_objects_is_102_bytes() {
        assert_eq!(encode_vdu(&vdu_with(10)).unwrap().len(), 102);
        let p = CmrPacket {
            ttl: 2,
            payload: vdu_with(10),
        };
        assert_eq!(encode_packet(&p).unwrap().len(), 103);
    }

    #[test]
    fn empty_vdu_is_header_only() {
        assert_eq!(encode_vdu(&vdu_with(0)).unwrap().len(), 22);
    }

    #[test]
    fn zero_object_encodes_to_zero_bytes() {
        let mut v = vdu_with(0);
        v.objects.push(DetectedObject {
            id: 0,
            position_x: 0,
            position_y: 0,
            velocity: 0,
            distance: 0,
            label: CategoryCode::Car,
            confidence: 0,
        });
        let b = encode_vdu(&v).unwrap();
        assert_eq!(b.len(), 30);
        assert!(b[22..].iter().all(|&x| x == 0));
    }

    #[test]
    fn too_many_objects() {
        assert_eq!(
            encode_vdu(&vdu_with(35)),
            Err(CodecError::ObjectCountExceeded { count: 35 })
        );
        assert!(encode_vdu(&vdu_with(34)).is_ok());
    }

    #[test]
    fn decode_errors() {
        assert_eq!(
            decode_vdu(&[0u8; 21]),
            Err(CodecError::TruncatedFrame { len: 21 })
        );
        assert_eq!(
            decode_vdu(&[0u8; 27]),
            Err(CodecError::MisalignedObjects { remainder: 5 })
        );
        assert_eq!(decode_packet(&[]), Err(CodecError::EmptyFrame));
        assert_eq!(
            decode_packet(&[2u8; 1]),
            Err(CodecError::TruncatedFrame { len: 0 })
        );
    }

    #[test]
    fn rejects_bad_fields() {
        let mut b = encode_vdu(&vdu_with(1)).unwrap();
        b[10 + IMU_MSG_TYPE_OFFSET] = 7;
        assert!(matches!(
            decode_vdu(&b),
            Err(CodecError::InvalidField { field: "msg_type", .. })
        ));

        let mut b = encode_vdu(&vdu_with(1)).unwrap();
        b[21] = 1;
        assert!(matches!(
            decode_vdu(&b),
            Err(CodecError::InvalidField { field: "imu_reserved", .. })
        ));

        let mut b = encode_vdu(&vdu_with(1)).unwrap();
        b[22 + 6] = 0xEE;
        assert!(matches!(
            decode_vdu(&b),
            Err(CodecError::InvalidField { field: "label", .. })
        ));

        let mut v = vdu_with(0);
        v.imu.direction = 36000;
        assert!(encode_vdu(&v).is_err());
    }

    #[test]
    fn field_placement_is_little_endian() {
        let v = vdu_with(1);
        let b = encode_vdu(&v).unwrap();
        assert_eq!(&b[0..2], &1234u16.to_le_bytes());
        assert_eq!(&b[2..6], &v.gps.lat.to_le_bytes());
        assert_eq!(&b[6..10], &v.gps.lon.to_le_bytes());
        assert_eq!(&b[10..12], &1388i16.to_le_bytes());
        assert_eq!(&b[12..14], &9000u16.to_le_bytes());
        assert_eq!(b[14], 1);
        assert_eq!(&b[22..24], &0u16.to_le_bytes());
        assert_eq!(b[28], CategoryCode::Car.code());
    }

    #[test]
    fn quantizers_saturate() {
        assert_eq!(DetectedObject::quantize_velocity(200.0), 255);
        assert_eq!(DetectedObject::quantize_velocity(-3.0), 0);
        assert_eq!(DetectedObject::quantize_distance(12.4), 12);
        assert_eq!(ImuBlock::quantize_heading(-90.0), 27000);
        assert_eq!(ImuBlock::quantize_heading(359.999), 0);
    }
}
