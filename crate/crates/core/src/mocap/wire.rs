//! MSTREAM/1: one little-endian datagram per frame.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "MS01"
//!      4     1  stream_id
//!      5     1  flags
//!      6     2  joint_count
//!      8     4  frame_no
//!     12     8  timestamp_us
//!     20    12  root position x, y, z (f32)
//!     32  16*n  joint quaternions w, x, y, z (f32)
//! ```

use thiserror::Error;

use super::MocapFrame;
use crate::pose::{UnitQuat, Vec3};

pub const MAGIC: &[u8; 4] = b"MS01";
pub const HEADER_LEN: usize = 32;

/// Datagrams whose quaternion norm falls outside this band are rejected.
const QUAT_NORM_BAND: (f32, f32) = (0.99, 1.01);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("truncated datagram: {got} bytes, need {need}")]
    Truncated { got: usize, need: usize },
    #[error("joint {joint} quaternion norm {norm} outside [0.99, 1.01]")]
    NonUnitQuat { joint: usize, norm: f32 },
    #[error("non-finite root position")]
    NonFinite,
}

pub fn encoded_len(joint_count: usize) -> usize {
    HEADER_LEN + 16 * joint_count
}

/// Serializes a frame. Joint counts above `u16::MAX` are truncated.
pub fn encode_frame(frame: &MocapFrame) -> Vec<u8> {
    let n = frame.joint_rotations.len().min(u16::MAX as usize);
    let mut out = Vec::with_capacity(encoded_len(n));
    out.extend_from_slice(MAGIC);
    out.push(frame.stream_id);
    out.push(frame.flags);
    out.extend_from_slice(&(n as u16).to_le_bytes());
    out.extend_from_slice(&frame.frame_no.to_le_bytes());
    out.extend_from_slice(&frame.timestamp_us.to_le_bytes());
    for c in frame.root_position.to_array() {
        out.extend_from_slice(&(c as f32).to_le_bytes());
    }
    for q in &frame.joint_rotations[..n] {
        for c in q.to_array() {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

/// Parses one datagram. Bytes past the declared joint payload are ignored.
pub fn decode_frame(bytes: &[u8]) -> Result<MocapFrame, WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated { got: bytes.len(), need: HEADER_LEN });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated { got: bytes.len(), need: HEADER_LEN });
    }
    let joint_count = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let need = encoded_len(joint_count);
    if bytes.len() < need {
        return Err(WireError::Truncated { got: bytes.len(), need });
    }
    let root = Vec3::new(
        f32_at(bytes, 20) as f64,
        f32_at(bytes, 24) as f64,
        f32_at(bytes, 28) as f64,
    );
    if !root.is_finite() {
        return Err(WireError::NonFinite);
    }
    let mut joints = Vec::with_capacity(joint_count);
    for j in 0..joint_count {
        let off = HEADER_LEN + 16 * j;
        let c = [f32_at(bytes, off), f32_at(bytes, off + 4), f32_at(bytes, off + 8), f32_at(bytes, off + 12)];
        let norm = c.iter().map(|v| v * v).sum::<f32>().sqrt();
        if !(norm >= QUAT_NORM_BAND.0 && norm <= QUAT_NORM_BAND.1) {
            return Err(WireError::NonUnitQuat { joint: j, norm });
        }
        joints.push(UnitQuat::new(c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64));
    }
    Ok(MocapFrame {
        stream_id: bytes[4],
        flags: bytes[5],
        frame_no: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
        timestamp_us: u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
        root_position: root,
        joint_rotations: joints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(joints: usize) -> MocapFrame {
        let rots = (0..joints).map(|i| UnitQuat::from_yaw(i as f64 * 0.1)).collect();
        MocapFrame::new(3, 7, 123_456, Vec3::new(0.5, 1.0, -0.25), rots)
    }

    #[test]
    fn lengths() {
        assert_eq!(encode_frame(&frame(0)).len(), 32);
        assert_eq!(encode_frame(&frame(50)).len(), 832);
    }

    #[test]
    fn frame_no_offset() {
        let b = encode_frame(&frame(2));
        assert_eq!(&b[8..12], &[7, 0, 0, 0]);
        assert_eq!(&b[..4], b"MS01");
    }

    #[test]
    fn round_trip() {
        let f = frame(5);
        assert_eq!(decode_frame(&encode_frame(&f)).unwrap(), f);
    }

    #[test]
    fn bad_magic() {
        let mut b = encode_frame(&frame(1));
        b[..4].copy_from_slice(b"XX01");
        assert_eq!(decode_frame(&b), Err(WireError::BadMagic(*b"XX01")));
    }

    #[test]
    fn truncated_payload() {
        let mut b = encode_frame(&frame(50));
        b.truncate(encoded_len(40));
        assert_eq!(decode_frame(&b), Err(WireError::Truncated { got: 672, need: 832 }));
        assert!(matches!(decode_frame(&b[..10]), Err(WireError::Truncated { .. })));
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        let mut b = encode_frame(&frame(2));
        // scale joint 1's w component to 2.0
        b[48..52].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(decode_frame(&b), Err(WireError::NonUnitQuat { joint: 1, .. })));
    }
}
