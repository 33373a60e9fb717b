//! Stage geometry: the mocaptor acting volume, the physical-stage to
//! digital-scenery calibration, and yaw-only gaze.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{UnitQuat, Vec3};

/// Horizontal separations at or below this are too close to aim at.
pub const MIN_GAZE_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StageError {
    #[error("volume min {min:?} not below max {max:?} on every axis")]
    InvalidVolume { min: [f64; 3], max: [f64; 3] },
    #[error("target is within {MIN_GAZE_DISTANCE} m horizontally")]
    DegenerateTarget,
}

/// Axis-aligned box; boundary points are inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVolume")]
pub struct Volume {
    min: Vec3,
    max: Vec3,
}

#[derive(Deserialize)]
struct RawVolume {
    min: Vec3,
    max: Vec3,
}

impl TryFrom<RawVolume> for Volume {
    type Error = StageError;
    fn try_from(r: RawVolume) -> Result<Self, StageError> {
        Volume::new(r.min, r.max)
    }
}

impl Volume {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, StageError> {
        if min.x < max.x && min.y < max.y && min.z < max.z {
            Ok(Self { min, max })
        } else {
            Err(StageError::InvalidVolume { min: min.to_array(), max: max.to_array() })
        }
    }

    pub fn min(&self) -> Vec3 {
        self.min
    }

    pub fn max(&self) -> Vec3 {
        self.max
    }

    pub fn contains(&self, p: Vec3) -> bool {
        clamp_to_volume(p, self).0 == p
    }
}

/// Clamps each component into the box; the flag is set iff any changed.
pub fn clamp_to_volume(p: Vec3, vol: &Volume) -> (Vec3, bool) {
    let c = Vec3::new(
        p.x.clamp(vol.min.x, vol.max.x),
        p.y.clamp(vol.min.y, vol.max.y),
        p.z.clamp(vol.min.z, vol.max.z),
    );
    (c, c != p)
}

/// Rigid map from one space into another: yaw about +Y, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub translation: Vec3,
    /// Radians.
    pub yaw: f64,
}

impl RigidTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        UnitQuat::from_yaw(self.yaw).rotate(p) + self.translation
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageCalibration {
    /// Acting volume per mocap stream, in that stream's local meters.
    pub c_volumes: BTreeMap<u8, Volume>,
    /// Physical stage (space A) into the digital scenery (space B).
    pub a_to_b: RigidTransform,
}

impl StageCalibration {
    pub fn volume(&self, stream_id: u8) -> Option<&Volume> {
        self.c_volumes.get(&stream_id)
    }
}

/// `R(yaw)·p + translation` with the calibration's A→B transform.
pub fn map_a_to_b(p_a: Vec3, calib: &StageCalibration) -> Vec3 {
    calib.a_to_b.apply(p_a)
}

/// What an avatar's head is turned toward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WatchTarget {
    /// Another avatar, by id.
    Avatar { id: String },
    /// A performer on the physical stage, in space-A meters.
    Performer { pos: Vec3 },
    /// A fixed point in the scenery.
    Point { pos: Vec3 },
}

/// Yaw whose forward direction `R(yaw)·(0,0,1)` points horizontally from
/// `from` toward `target`.
pub fn look_at_yaw(from: Vec3, target: Vec3) -> Result<f64, StageError> {
    let dx = target.x - from.x;
    let dz = target.z - from.z;
    if dx.hypot(dz) <= MIN_GAZE_DISTANCE {
        return Err(StageError::DegenerateTarget);
    }
    Ok(dx.atan2(dz))
}
