//! Manipulator axis input and the channel-ownership table.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::TransformDelta;

/// One sample of manipulator axes, each clamped to [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisInput {
    pub forward: f64,
    pub lateral: f64,
    pub vertical: f64,
    pub yaw_rate: f64,
    pub pitch_rate: f64,
    pub timestamp_us: u64,
}

fn clamp_axis(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

impl AxisInput {
    pub fn new(forward: f64, lateral: f64, vertical: f64, yaw_rate: f64, pitch_rate: f64, timestamp_us: u64) -> Self {
        Self {
            forward: clamp_axis(forward),
            lateral: clamp_axis(lateral),
            vertical: clamp_axis(vertical),
            yaw_rate: clamp_axis(yaw_rate),
            pitch_rate: clamp_axis(pitch_rate),
            timestamp_us,
        }
    }

    pub fn forward(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0, 0.0, 0)
    }

    pub fn clamped(self) -> Self {
        Self::new(self.forward, self.lateral, self.vertical, self.yaw_rate, self.pitch_rate, self.timestamp_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipulatorConfig {
    /// m/s for forward and lateral motion.
    pub linear_speed: f64,
    /// m/s along world up.
    pub vertical_speed: f64,
    /// rad/s.
    pub yaw_speed: f64,
    /// rad/s.
    pub pitch_speed: f64,
    pub dead_zone: f64,
}

impl Default for ManipulatorConfig {
    fn default() -> Self {
        Self { linear_speed: 1.5, vertical_speed: 0.5, yaw_speed: FRAC_PI_2, pitch_speed: FRAC_PI_4, dead_zone: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NonPositiveSpeed(&'static str),
    #[error("dead zone {0} outside [0, 0.5)")]
    DeadZone(f64),
}

impl ManipulatorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("linear_speed", self.linear_speed),
            ("vertical_speed", self.vertical_speed),
            ("yaw_speed", self.yaw_speed),
            ("pitch_speed", self.pitch_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::NonPositiveSpeed(name));
            }
        }
        if !(0.0..0.5).contains(&self.dead_zone) {
            return Err(ConfigError::DeadZone(self.dead_zone));
        }
        Ok(())
    }
}

/// Dead-zone rescale: |v| < dz maps to 0, dz..1 maps linearly onto 0..1.
fn shape_axis(v: f64, dead_zone: f64) -> f64 {
    let v = clamp_axis(v);
    let mag = v.abs();
    if mag < dead_zone {
        return 0.0;
    }
    v.signum() * (mag - dead_zone) / (1.0 - dead_zone)
}

/// Converts axis input held for `dt` seconds into a reference delta.
pub fn axes_to_delta(input: &AxisInput, cfg: &ManipulatorConfig, dt: f64) -> TransformDelta {
    let dz = cfg.dead_zone;
    TransformDelta {
        d_forward: shape_axis(input.forward, dz) * cfg.linear_speed * dt,
        d_lateral: shape_axis(input.lateral, dz) * cfg.linear_speed * dt,
        d_vertical: shape_axis(input.vertical, dz) * cfg.vertical_speed * dt,
        d_yaw: shape_axis(input.yaw_rate, dz) * cfg.yaw_speed * dt,
        d_pitch: shape_axis(input.pitch_rate, dz) * cfg.pitch_speed * dt,
    }
}

/// Independently ownable slice of an avatar's motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Channel {
    /// Root position in the ground plane (world X/Z).
    RootXy,
    RootVertical,
    RootYaw,
    RootPitch,
    /// Every joint except the root and the head.
    Limbs,
    Head,
}

impl Channel {
    pub const ALL: [Channel; 6] =
        [Channel::RootXy, Channel::RootVertical, Channel::RootYaw, Channel::RootPitch, Channel::Limbs, Channel::Head];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::RootXy => "ROOT_XY",
            Channel::RootVertical => "ROOT_VERTICAL",
            Channel::RootYaw => "ROOT_YAW",
            Channel::RootPitch => "ROOT_PITCH",
            Channel::Limbs => "LIMBS",
            Channel::Head => "HEAD",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown channel {0:?}")]
pub struct UnknownChannel(pub String);

impl FromStr for Channel {
    type Err = UnknownChannel;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownChannel(s.to_string()))
    }
}

/// Non-mocap side of a blend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partner {
    #[default]
    Manipulator,
    Procedural,
}

/// Control authority over one channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    #[default]
    Mocap,
    Manipulator,
    Procedural,
    /// `weight` is the partner's share; the mocap keeps `1 - weight`.
    Blend { partner: Partner, weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OwnerError {
    #[error("unknown owner {0:?}")]
    UnknownOwner(String),
    #[error("blend weight {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("unknown blend partner {0:?}")]
    UnknownPartner(String),
}

impl Owner {
    /// Parses the flat form used by cue sheets and control messages:
    /// `owner` ∈ {mocap, manipulator, procedural, blend}, with `weight`
    /// (default 0.5) and `partner` (default manipulator) for blends.
    pub fn from_parts(owner: &str, weight: Option<f64>, partner: Option<&str>) -> Result<Owner, OwnerError> {
        match owner.to_ascii_lowercase().as_str() {
            "mocap" => Ok(Owner::Mocap),
            "manipulator" => Ok(Owner::Manipulator),
            "procedural" => Ok(Owner::Procedural),
            "blend" => {
                let weight = weight.unwrap_or(0.5);
                if !(0.0..=1.0).contains(&weight) {
                    return Err(OwnerError::BadWeight(weight));
                }
                let partner = match partner.map(str::to_ascii_lowercase).as_deref() {
                    None | Some("manipulator") => Partner::Manipulator,
                    Some("procedural") => Partner::Procedural,
                    Some(other) => return Err(OwnerError::UnknownPartner(other.to_string())),
                };
                Ok(Owner::Blend { partner, weight })
            }
            other => Err(OwnerError::UnknownOwner(other.to_string())),
        }
    }

    /// Share of the channel still taken from the mocap stream.
    pub fn mocap_share(&self) -> f64 {
        match *self {
            Owner::Mocap => 1.0,
            Owner::Manipulator | Owner::Procedural => 0.0,
            Owner::Blend { weight, .. } => 1.0 - weight,
        }
    }

    /// Whether manipulator deltas reach the reference for this channel.
    pub fn drives_manipulator(&self) -> bool {
        matches!(self, Owner::Manipulator | Owner::Blend { partner: Partner::Manipulator, .. })
    }

    pub fn drives_procedural(&self) -> bool {
        matches!(self, Owner::Procedural | Owner::Blend { partner: Partner::Procedural, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OwnershipError {
    #[error("unknown avatar {0:?}")]
    UnknownAvatar(String),
}

/// Owner of every (avatar, channel) pair. New avatars start fully mocap.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OwnershipTable {
    rows: BTreeMap<String, [Owner; 6]>,
    revision: u64,
}

impl OwnershipTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_avatar(&mut self, avatar: &str) {
        self.rows.entry(avatar.to_string()).or_insert([Owner::Mocap; 6]);
        self.revision += 1;
    }

    pub fn contains(&self, avatar: &str) -> bool {
        self.rows.contains_key(avatar)
    }

    pub fn get(&self, avatar: &str, channel: Channel) -> Option<Owner> {
        self.rows.get(avatar).map(|r| r[channel.index()])
    }

    pub fn row(&self, avatar: &str) -> Option<&[Owner; 6]> {
        self.rows.get(avatar)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[Owner; 6])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Incremented by every mutation; lets the mixer prove a tick resolved
    /// against a single snapshot.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn set(&mut self, avatar: &str, channel: Channel, owner: Owner) -> Result<(), OwnershipError> {
        let row = self.rows.get_mut(avatar).ok_or_else(|| OwnershipError::UnknownAvatar(avatar.to_string()))?;
        row[channel.index()] = owner;
        self.revision += 1;
        Ok(())
    }

    /// Value-returning form of [`OwnershipTable::set`].
    pub fn with_owner(&self, avatar: &str, channel: Channel, owner: Owner) -> Result<Self, OwnershipError> {
        let mut t = self.clone();
        t.set(avatar, channel, owner)?;
        Ok(t)
    }
}
