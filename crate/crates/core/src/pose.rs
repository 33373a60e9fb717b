//! Geometric value types and the reference-transform algebra.
//!
//! Conventions: right-handed, +Y up, forward is +Z, lengths in meters.
//! Yaw rotates about world +Y (a +90° yaw turns +Z into +X). Pitch rotates
//! about the heading-local +X axis and is applied after yaw, so a reference
//! rotates a local vector as `Q(yaw) * Q(pitch) * v`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quaternions whose norm drifts further than this from 1 are renormalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const UP: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const FORWARD: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self).scale(t)
    }

    /// Distance in the ground (X/Z) plane.
    pub fn horizontal_distance(self, o: Vec3) -> f64 {
        let dx = o.x - self.x;
        let dz = o.z - self.z;
        (dx * dx + dz * dz).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion stored as (w, x, y, z).
///
/// Every constructor and product keeps the norm within [`NORM_TOLERANCE`] of
/// one; values already inside the tolerance are stored untouched so that
/// quantized wire values survive a round trip bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quaternion ({0}, {1}, {2}, {3}) cannot be normalized")]
pub struct InvalidQuat(pub f64, pub f64, pub f64, pub f64);

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a unit quaternion, renormalizing when the norm is off by more
    /// than [`NORM_TOLERANCE`]. Zero or non-finite input is rejected.
    pub fn try_new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, InvalidQuat> {
        let n2 = w * w + x * x + y * y + z * z;
        if !n2.is_finite() || n2 < 1e-24 {
            return Err(InvalidQuat(w, x, y, z));
        }
        Ok(Self { w, x, y, z }.renormalized())
    }

    /// Like [`UnitQuat::try_new`] but panics on degenerate input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::try_new(w, x, y, z).expect("degenerate quaternion")
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let len = axis.length();
        if len == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let a = axis.scale(s / len);
        Self::new(c, a.x, a.y, a.z)
    }

    /// Rotation about world +Y.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw * 0.5).sin_cos();
        Self::new(c, 0.0, s, 0.0)
    }

    /// Rotation about +X.
    pub fn from_pitch(pitch: f64) -> Self {
        let (s, c) = (pitch * 0.5).sin_cos();
        Self::new(c, s, 0.0, 0.0)
    }

    /// Rotation about +Z.
    pub fn from_roll(roll: f64) -> Self {
        let (s, c) = (roll * 0.5).sin_cos();
        Self::new(c, 0.0, 0.0, s)
    }

    /// Inverse of [`UnitQuat::to_yaw_pitch_roll`]: `Q(yaw) * Q(pitch) * Q(roll)`.
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::from_yaw(yaw) * Self::from_pitch(pitch) * Self::from_roll(roll)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn renormalized(self) -> Self {
        let n = self.norm();
        if (n - 1.0).abs() <= NORM_TOLERANCE {
            return self;
        }
        Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Conjugate divided by the squared norm, so `q * q.inverse()` is the
    /// identity even for the slightly non-unit values `f32` rounding leaves.
    pub fn inverse(self) -> Self {
        let n2 = self.dot(self);
        Self { w: self.w / n2, x: -self.x / n2, y: -self.y / n2, z: -self.z / n2 }
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Rotates by `self / |self|`.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v + (2w(q x v) + 2 q x (q x v)) / |q|^2
        let q = Vec3::new(self.x, self.y, self.z);
        let t = q.cross(v).scale(2.0);
        v + (t.scale(self.w) + q.cross(t)).scale(1.0 / self.dot(self))
    }

    /// Shortest-arc spherical interpolation; `t = 0` gives `self`.
    pub fn slerp(self, other: UnitQuat, t: f64) -> UnitQuat {
        if t <= 0.0 {
            return self;
        }
        if t >= 1.0 {
            return other;
        }
        let mut o = other;
        let mut cos = self.dot(o);
        if cos < 0.0 {
            o = Self { w: -o.w, x: -o.x, y: -o.y, z: -o.z };
            cos = -cos;
        }
        let (a, b) = if cos > 1.0 - 1e-9 {
            (1.0 - t, t)
        } else {
            let theta = cos.min(1.0).acos();
            let s = theta.sin();
            (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
        };
        let raw = Self {
            w: a * self.w + b * o.w,
            x: a * self.x + b * o.x,
            y: a * self.y + b * o.y,
            z: a * self.z + b * o.z,
        };
        let n = raw.norm();
        Self { w: raw.w / n, x: raw.x / n, y: raw.y / n, z: raw.z / n }.renormalized()
    }

    /// Angle in radians of the relative rotation between two quaternions.
    pub fn angle_to(self, other: UnitQuat) -> f64 {
        let d = self.dot(other).abs().min(1.0);
        2.0 * d.acos()
    }

    /// Decomposes into (yaw, pitch, roll) such that
    /// `self == Q(yaw) * Q(pitch) * Q(roll)`.
    pub fn to_yaw_pitch_roll(self) -> (f64, f64, f64) {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        // rotation matrix entries needed for the Y-X-Z factorization
        let r02 = 2.0 * (x * z + w * y);
        let r12 = 2.0 * (y * z - w * x);
        let r22 = 1.0 - 2.0 * (x * x + y * y);
        let r10 = 2.0 * (x * y + w * z);
        let r11 = 1.0 - 2.0 * (x * x + z * z);
        let pitch = (-r12).clamp(-1.0, 1.0).asin();
        let yaw = r02.atan2(r22);
        let roll = r10.atan2(r11);
        (yaw, pitch, roll)
    }

    /// Heading of the rotated forward axis projected onto the ground plane.
    /// Returns `None` when the forward axis points straight up or down.
    pub fn forward_yaw(self) -> Option<f64> {
        let f = self.rotate(Vec3::FORWARD);
        if f.x.hypot(f.z) < 1e-12 {
            None
        } else {
            Some(f.x.atan2(f.z))
        }
    }

    /// Rounds each component to `f32` precision (norm stays within tolerance).
    pub fn quantized_f32(self) -> Self {
        Self {
            w: self.w as f32 as f64,
            x: self.x as f32 as f64,
            y: self.y as f32 as f64,
            z: self.z as f32 as f64,
        }
        .renormalized()
    }
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, o: UnitQuat) -> UnitQuat {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
        .renormalized()
    }
}

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = InvalidQuat;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        Self::try_new(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = a - TAU * ((a + PI) / TAU).floor();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// The reference `T` placing a mocap stream's local frame into the digital
/// scenery: translation plus explicit yaw and pitch scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawReference")]
pub struct ReferenceTransform {
    translation: Vec3,
    yaw: f64,
    pitch: f64,
}

#[derive(Deserialize)]
struct RawReference {
    translation: Vec3,
    yaw: f64,
    pitch: f64,
}

impl From<RawReference> for ReferenceTransform {
    fn from(r: RawReference) -> Self {
        ReferenceTransform::new(r.translation, r.yaw, r.pitch)
    }
}

impl Default for ReferenceTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl ReferenceTransform {
    pub const IDENTITY: ReferenceTransform =
        ReferenceTransform { translation: Vec3::ZERO, yaw: 0.0, pitch: 0.0 };

    /// Yaw is wrapped to (−π, π], pitch clamped to [−π/2, π/2].
    pub fn new(translation: Vec3, yaw: f64, pitch: f64) -> Self {
        Self { translation, yaw: wrap_angle(yaw), pitch: pitch.clamp(-FRAC_PI_2, FRAC_PI_2) }
    }

    pub fn from_degrees(translation: Vec3, yaw_deg: f64, pitch_deg: f64) -> Self {
        Self::new(translation, yaw_deg.to_radians(), pitch_deg.to_radians())
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }
    pub fn yaw(&self) -> f64 {
        self.yaw
    }
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn with_translation(self, translation: Vec3) -> Self {
        Self { translation, ..self }
    }

    pub fn with_yaw(self, yaw: f64) -> Self {
        Self { yaw: wrap_angle(yaw), ..self }
    }

    /// `Q(yaw) * Q(pitch)`.
    pub fn rotation(&self) -> UnitQuat {
        UnitQuat::from_yaw(self.yaw) * UnitQuat::from_pitch(self.pitch)
    }
}

/// Root of a source skeleton relative to its stream origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RootPose {
    pub position: Vec3,
    pub rotation: UnitQuat,
}

/// Avatar pose in the digital scenery.
///
/// `rotation` is the world rotation of the root joint. `joint_rotations`
/// holds local rotations in topology order; entry 0 is the root's local
/// rotation before the reference transform was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPose {
    pub position: Vec3,
    pub rotation: UnitQuat,
    pub joint_rotations: Vec<UnitQuat>,
}

impl WorldPose {
    /// Every joint at rest, root at `reference`.
    pub fn bind(reference: &ReferenceTransform, joint_count: usize) -> Self {
        let (position, rotation) = compose(reference, &RootPose::default());
        Self { position, rotation, joint_rotations: vec![UnitQuat::IDENTITY; joint_count] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub bind_offset: Vec3,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology has no joints")]
    Empty,
    #[error("joint 0 must be the root (no parent)")]
    RootHasParent,
    #[error("joint {index} ({name}) has no parent but is not the root")]
    SecondRoot { index: usize, name: String },
    #[error("joint {index} ({name}) has parent {parent} which does not precede it")]
    ParentOrder { index: usize, name: String, parent: usize },
    #[error("duplicate joint name {0:?}")]
    DuplicateName(String),
}

/// Joint hierarchy in topological order (parents precede children).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Joint>", into = "Vec<Joint>")]
pub struct SkeletonTopology {
    joints: Vec<Joint>,
}

impl SkeletonTopology {
    pub fn new(joints: Vec<Joint>) -> Result<Self, TopologyError> {
        let Some(root) = joints.first() else {
            return Err(TopologyError::Empty);
        };
        if root.parent.is_some() {
            return Err(TopologyError::RootHasParent);
        }
        let mut seen = std::collections::HashSet::new();
        for (index, j) in joints.iter().enumerate() {
            if !seen.insert(j.name.as_str()) {
                return Err(TopologyError::DuplicateName(j.name.clone()));
            }
            if index == 0 {
                continue;
            }
            match j.parent {
                None => return Err(TopologyError::SecondRoot { index, name: j.name.clone() }),
                Some(p) if p >= index => {
                    return Err(TopologyError::ParentOrder { index, name: j.name.clone(), parent: p })
                }
                Some(_) => {}
            }
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// The joint whose name is "head" ignoring ASCII case, if any.
    pub fn head_index(&self) -> Option<usize> {
        self.joints.iter().position(|j| j.name.eq_ignore_ascii_case("head"))
    }
}

impl TryFrom<Vec<Joint>> for SkeletonTopology {
    type Error = TopologyError;
    fn try_from(j: Vec<Joint>) -> Result<Self, Self::Error> {
        Self::new(j)
    }
}

impl From<SkeletonTopology> for Vec<Joint> {
    fn from(t: SkeletonTopology) -> Self {
        t.joints
    }
}

/// Reference-transform change requested by a manipulator for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformDelta {
    pub d_forward: f64,
    pub d_lateral: f64,
    pub d_vertical: f64,
    pub d_yaw: f64,
    pub d_pitch: f64,
}

impl TransformDelta {
    pub const ZERO: TransformDelta =
        TransformDelta { d_forward: 0.0, d_lateral: 0.0, d_vertical: 0.0, d_yaw: 0.0, d_pitch: 0.0 };
}

/// Places a local root pose into the scenery:
/// `position = Q(yaw)Q(pitch)·local + translation`, `rotation = Q(yaw)Q(pitch)·local`.
pub fn compose(reference: &ReferenceTransform, local: &RootPose) -> (Vec3, UnitQuat) {
    let r = reference.rotation();
    (r.rotate(local.position) + reference.translation, r * local.rotation)
}

/// Moves the reference in its own heading frame. Horizontal motion follows
/// the yaw only; vertical motion is along world up.
pub fn apply_delta(reference: &ReferenceTransform, delta: &TransformDelta) -> ReferenceTransform {
    let step = heading_frame(reference).rotate(Vec3::new(delta.d_lateral, 0.0, delta.d_forward))
        + Vec3::new(0.0, delta.d_vertical, 0.0);
    ReferenceTransform::new(
        reference.translation + step,
        reference.yaw + delta.d_yaw,
        reference.pitch + delta.d_pitch,
    )
}

/// Yaw-only rotation of the reference (pitch discarded).
pub fn heading_frame(reference: &ReferenceTransform) -> UnitQuat {
    UnitQuat::from_yaw(reference.yaw)
}

/// World position and rotation of every joint, using bind offsets as bone
/// vectors. Entry 0 is the root (`pose.position`, `pose.rotation`).
pub fn forward_kinematics(topology: &SkeletonTopology, pose: &WorldPose) -> Vec<(Vec3, UnitQuat)> {
    let mut out: Vec<(Vec3, UnitQuat)> = Vec::with_capacity(topology.len());
    for (i, joint) in topology.joints().iter().enumerate() {
        let entry = match joint.parent {
            None => (pose.position, pose.rotation),
            Some(p) => {
                let (pp, pr) = out[p];
                let local = pose.joint_rotations.get(i).copied().unwrap_or_default();
                (pp + pr.rotate(joint.bind_offset), pr * local)
            }
        };
        out.push(entry);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).length() <= tol
    }

    #[test]
    fn compose_identity_is_exact() {
        let local = RootPose {
            position: Vec3::new(1.0, 0.0, 2.0),
            rotation: UnitQuat::from_yaw(0.3) * UnitQuat::from_pitch(-0.2),
        };
        let (p, r) = compose(&ReferenceTransform::IDENTITY, &local);
        assert_eq!(p, Vec3::new(1.0, 0.0, 2.0));
        assert_eq!(r, local.rotation);
    }

    #[test]
    fn compose_yaw_quarter_turn() {
        let reference = ReferenceTransform::from_degrees(Vec3::new(10.0, 0.0, 0.0), 90.0, 0.0);
        let local = RootPose { position: Vec3::new(1.0, 0.0, 2.0), ..Default::default() };
        let (p, _) = compose(&reference, &local);
        assert!(close(p, Vec3::new(12.0, 0.0, -1.0), EPS), "{p:?}");
    }

    #[test]
    fn compose_pure_translation() {
        let reference = ReferenceTransform::new(Vec3::new(0.0, 5.0, 0.0), 0.0, 0.0);
        let (p, _) = compose(&reference, &RootPose::default());
        assert_eq!(p, Vec3::new(0.0, 5.0, 0.0));
    }

    #[test]
    fn apply_delta_forward_follows_heading() {
        let d = TransformDelta { d_forward: 0.015, ..TransformDelta::ZERO };
        let r = apply_delta(&ReferenceTransform::IDENTITY, &d);
        assert_eq!(r.translation(), Vec3::new(0.0, 0.0, 0.015));
        assert_eq!((r.yaw(), r.pitch()), (0.0, 0.0));

        let turned = ReferenceTransform::from_degrees(Vec3::ZERO, 90.0, 0.0);
        let d = TransformDelta { d_forward: 1.0, ..TransformDelta::ZERO };
        let r = apply_delta(&turned, &d);
        assert!(close(r.translation(), Vec3::new(1.0, 0.0, 0.0), EPS));
    }

    #[test]
    fn apply_delta_zero_is_identity() {
        let r = ReferenceTransform::new(Vec3::new(1.0, 2.0, 3.0), 0.7, -0.3);
        assert_eq!(apply_delta(&r, &TransformDelta::ZERO), r);
    }

    #[test]
    fn pitch_clamps_and_yaw_wraps() {
        let r = ReferenceTransform::new(Vec3::ZERO, 0.0, 1.5);
        let r = apply_delta(&r, &TransformDelta { d_pitch: 1.0, d_yaw: 3.0 * PI, ..TransformDelta::ZERO });
        assert_eq!(r.pitch(), FRAC_PI_2);
        assert!((r.yaw() - PI).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + TAU)).abs() < 1e-12);
    }

    #[test]
    fn heading_frame_discards_pitch() {
        assert_eq!(heading_frame(&ReferenceTransform::IDENTITY), UnitQuat::IDENTITY);
        let r = ReferenceTransform::from_degrees(Vec3::ZERO, 90.0, 45.0);
        assert!(heading_frame(&r).angle_to(UnitQuat::from_yaw(FRAC_PI_2)) < 1e-12);
        let r = ReferenceTransform::from_degrees(Vec3::ZERO, 0.0, 90.0);
        assert_eq!(heading_frame(&r), UnitQuat::IDENTITY);
    }

    #[test]
    fn yaw_pitch_roll_round_trip() {
        for &(y, p, r) in &[(0.3, -0.4, 1.2), (-2.9, 1.1, -0.1), (1.0, 0.0, 0.0), (0.0, 0.0, -3.0)] {
            let q = UnitQuat::from_yaw_pitch_roll(y, p, r);
            let (y2, p2, r2) = q.to_yaw_pitch_roll();
            assert!((y - y2).abs() < 1e-9 && (p - p2).abs() < 1e-9 && (r - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn slerp_shortest_arc_and_endpoints() {
        let a = UnitQuat::from_yaw(0.2);
        let b = UnitQuat::from_yaw(1.0);
        assert_eq!(a.slerp(b, 0.0), a);
        assert_eq!(a.slerp(b, 1.0), b);
        assert!(a.slerp(b, 0.5).angle_to(UnitQuat::from_yaw(0.6)) < 1e-9);
        // negated quaternion is the same rotation; slerp must not take the long way
        let neg = UnitQuat::new(-b.w(), -b.x(), -b.y(), -b.z());
        assert!(a.slerp(neg, 0.5).angle_to(UnitQuat::from_yaw(0.6)) < 1e-9);
    }

    #[test]
    fn quaternion_renormalizes_drift() {
        let q = UnitQuat::new(2.0, 0.0, 0.0, 0.0);
        assert_eq!(q, UnitQuat::IDENTITY);
        assert!(UnitQuat::try_new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuat::try_new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        let mut acc = UnitQuat::IDENTITY;
        for _ in 0..10_000 {
            acc = acc * UnitQuat::from_axis_angle(Vec3::new(0.3, 0.9, -0.2), 0.37);
        }
        assert!((acc.norm() - 1.0).abs() <= NORM_TOLERANCE);
    }

    #[test]
    fn topology_validation() {
        let j = |name: &str, parent| Joint { name: name.into(), parent, bind_offset: Vec3::ZERO };
        assert_eq!(SkeletonTopology::new(vec![]), Err(TopologyError::Empty));
        assert!(matches!(
            SkeletonTopology::new(vec![j("a", None), j("b", Some(2)), j("c", Some(0))]),
            Err(TopologyError::ParentOrder { .. })
        ));
        assert!(matches!(
            SkeletonTopology::new(vec![j("a", None), j("a", Some(0))]),
            Err(TopologyError::DuplicateName(_))
        ));
        assert!(matches!(
            SkeletonTopology::new(vec![j("a", None), j("b", None)]),
            Err(TopologyError::SecondRoot { .. })
        ));
        let t = SkeletonTopology::new(vec![j("Hips", None), j("Head", Some(0))]).unwrap();
        assert_eq!(t.head_index(), Some(1));
    }

    #[test]
    fn forward_kinematics_chain() {
        let topo = SkeletonTopology::new(vec![
            Joint { name: "root".into(), parent: None, bind_offset: Vec3::ZERO },
            Joint { name: "a".into(), parent: Some(0), bind_offset: Vec3::new(0.0, 1.0, 0.0) },
            Joint { name: "b".into(), parent: Some(1), bind_offset: Vec3::new(0.0, 0.0, 1.0) },
        ])
        .unwrap();
        let pose = WorldPose {
            position: Vec3::new(5.0, 0.0, 0.0),
            rotation: UnitQuat::IDENTITY,
            joint_rotations: vec![UnitQuat::IDENTITY, UnitQuat::from_yaw(FRAC_PI_2), UnitQuat::IDENTITY],
        };
        let fk = forward_kinematics(&topo, &pose);
        assert!(close(fk[1].0, Vec3::new(5.0, 1.0, 0.0), EPS));
        assert!(close(fk[2].0, Vec3::new(6.0, 1.0, 0.0), EPS));
    }
}
