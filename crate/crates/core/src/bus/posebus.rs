//! POSEBUS/1: one little-endian datagram per avatar per tick.
//!
//! ```text
//! 0   magic "PB01"
//! 4   tick_no        u64
//! 12  avatar_id      u16
//! 14  root position  3 x f32
//! 26  root rotation  4 x f32 (w, x, y, z)
//! 42  joint_count    u16
//! 44  joints         joint_count x 4 x f32 (w, x, y, z)
//! ```

use thiserror::Error;

use crate::pose::WorldPose;

pub const MAGIC: &[u8; 4] = b"PB01";
pub const HEADER_LEN: usize = 44;
pub const DEFAULT_POSEBUS_PORT: u16 = 7001;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoseBusError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated message: {got} bytes, need {need}")]
    Truncated { got: usize, need: usize },
    #[error("pose has {0} joints, more than a message can carry")]
    TooManyJoints(usize),
}

/// Wire form of one avatar's pose at `f32` precision.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseMessage {
    pub tick_no: u64,
    pub avatar_id: u16,
    pub position: [f32; 3],
    pub rotation: [f32; 4],
    pub joints: Vec<[f32; 4]>,
}

fn q32(q: crate::pose::UnitQuat) -> [f32; 4] {
    q.to_array().map(|c| c as f32)
}

impl PoseMessage {
    pub fn from_pose(tick_no: u64, avatar_id: u16, pose: &WorldPose) -> Result<Self, PoseBusError> {
        if pose.joint_rotations.len() > u16::MAX as usize {
            return Err(PoseBusError::TooManyJoints(pose.joint_rotations.len()));
        }
        Ok(Self {
            tick_no,
            avatar_id,
            position: pose.position.to_array().map(|c| c as f32),
            rotation: q32(pose.rotation),
            joints: pose.joint_rotations.iter().map(|q| q32(*q)).collect(),
        })
    }

    /// Field-wise equality on bit patterns (distinguishes −0.0 and NaNs).
    pub fn bit_eq(&self, other: &PoseMessage) -> bool {
        let bits = |s: &[f32]| s.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        self.tick_no == other.tick_no
            && self.avatar_id == other.avatar_id
            && bits(&self.position) == bits(&other.position)
            && bits(&self.rotation) == bits(&other.rotation)
            && self.joints.len() == other.joints.len()
            && self.joints.iter().zip(&other.joints).all(|(a, b)| bits(a) == bits(b))
    }
}

pub fn encoded_len(joint_count: usize) -> usize {
    HEADER_LEN + 16 * joint_count
}

pub fn encode_pose_msg(msg: &PoseMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(msg.joints.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&msg.tick_no.to_le_bytes());
    out.extend_from_slice(&msg.avatar_id.to_le_bytes());
    for c in msg.position.iter().chain(&msg.rotation) {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&(msg.joints.len() as u16).to_le_bytes());
    for q in &msg.joints {
        for c in q {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_pose_msg(bytes: &[u8]) -> Result<PoseMessage, PoseBusError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(PoseBusError::BadMagic(bytes[..4].try_into().expect("4 bytes")));
        }
        return Err(PoseBusError::Truncated { got: bytes.len(), need: HEADER_LEN });
    }
    if &bytes[..4] != MAGIC {
        return Err(PoseBusError::BadMagic(bytes[..4].try_into().expect("4 bytes")));
    }
    let tick_no = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let avatar_id = u16::from_le_bytes([bytes[12], bytes[13]]);
    let position = [f32_at(bytes, 14), f32_at(bytes, 18), f32_at(bytes, 22)];
    let rotation = [f32_at(bytes, 26), f32_at(bytes, 30), f32_at(bytes, 34), f32_at(bytes, 38)];
    let n = u16::from_le_bytes([bytes[42], bytes[43]]) as usize;
    let need = encoded_len(n);
    if bytes.len() < need {
        return Err(PoseBusError::Truncated { got: bytes.len(), need });
    }
    let joints = (0..n)
        .map(|j| {
            let at = HEADER_LEN + 16 * j;
            [f32_at(bytes, at), f32_at(bytes, at + 4), f32_at(bytes, at + 8), f32_at(bytes, at + 12)]
        })
        .collect();
    Ok(PoseMessage { tick_no, avatar_id, position, rotation, joints })
}
