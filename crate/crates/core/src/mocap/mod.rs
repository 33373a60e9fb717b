//! Skeleton stream ingestion: the MSTREAM/1 datagram codec, the BVH loader
//! used for offline playback, and per-stream clocks.

mod bvh;
mod stream;
mod wire;

use serde::{Deserialize, Serialize};

use crate::pose::{SkeletonTopology, UnitQuat, Vec3};

pub use bvh::{load_bvh, parse_bvh, BvhClip, BvhError, RotationOrder};
pub use stream::{
    BvhPlayback, FrameSource, StreamError, StreamOrigin, StreamSource, UdpFrameStore,
    DEFAULT_MOCAP_PORT, STALE_AFTER_US,
};
pub use wire::{decode_frame, encode_frame, encoded_len, WireError, HEADER_LEN, MAGIC};

/// One timestamped sample of a source skeleton.
///
/// Components are held at `f32` precision (see [`MocapFrame::new`]) so a
/// frame survives the wire codec bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MocapFrame {
    pub stream_id: u8,
    pub flags: u8,
    pub frame_no: u32,
    pub timestamp_us: u64,
    /// Root position in the mocaptor's acting volume, meters.
    pub root_position: Vec3,
    pub joint_rotations: Vec<UnitQuat>,
}

impl MocapFrame {
    /// Builds a frame, quantizing every component to `f32`.
    pub fn new(
        stream_id: u8,
        frame_no: u32,
        timestamp_us: u64,
        root_position: Vec3,
        joint_rotations: Vec<UnitQuat>,
    ) -> Self {
        let q = |v: f64| v as f32 as f64;
        Self {
            stream_id,
            flags: 0,
            frame_no,
            timestamp_us,
            root_position: Vec3::new(q(root_position.x), q(root_position.y), q(root_position.z)),
            joint_rotations: joint_rotations.into_iter().map(UnitQuat::quantized_f32).collect(),
        }
    }

    /// All joints at rest, root at the stream origin.
    pub fn identity(stream_id: u8, topology: &SkeletonTopology) -> Self {
        Self::new(stream_id, 0, 0, Vec3::ZERO, vec![UnitQuat::IDENTITY; topology.len()])
    }
}
