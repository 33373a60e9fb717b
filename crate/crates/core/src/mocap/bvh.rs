//! ASCII BVH loader (HIERARCHY + MOTION).
//!
//! Joint order is depth-first file order. End sites are not joints. Only the
//! root's position channels are kept; per-joint position channels are read
//! and discarded. Angles are degrees and a joint's rotation channels compose
//! in the order listed, e.g. `Zrotation Xrotation Yrotation` is `Rz·Rx·Ry`.

use std::path::Path;

use thiserror::Error;

use super::MocapFrame;
use crate::pose::{Joint, SkeletonTopology, TopologyError, UnitQuat, Vec3};

#[derive(Debug, Error)]
pub enum BvhError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("joint {joint}: unsupported rotation channel order {order}")]
    UnsupportedChannelOrder { joint: String, order: String },
    #[error("invalid hierarchy: {0}")]
    Topology(#[from] TopologyError),
    #[error("io error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn parse_err(line: usize, message: impl Into<String>) -> BvhError {
    BvhError::Parse { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationOrder {
    Zxy,
    Xyz,
    Zyx,
}

impl RotationOrder {
    fn axes(self) -> [u8; 3] {
        match self {
            RotationOrder::Zxy => *b"ZXY",
            RotationOrder::Xyz => *b"XYZ",
            RotationOrder::Zyx => *b"ZYX",
        }
    }

    /// Quaternion for angles given per axis (x, y, z) in degrees.
    pub fn to_quat(self, x_deg: f64, y_deg: f64, z_deg: f64) -> UnitQuat {
        let axis = |a: u8| match a {
            b'X' => UnitQuat::from_pitch(x_deg.to_radians()),
            b'Y' => UnitQuat::from_yaw(y_deg.to_radians()),
            _ => UnitQuat::from_roll(z_deg.to_radians()),
        };
        let [a, b, c] = self.axes();
        axis(a) * axis(b) * axis(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Pos(usize),
    Rot(u8),
}

/// Result of loading a BVH file.
#[derive(Debug, Clone, PartialEq)]
pub struct BvhClip {
    pub topology: SkeletonTopology,
    pub frames: Vec<MocapFrame>,
    /// Seconds per frame.
    pub frame_time: f64,
}

impl BvhClip {
    pub fn frame_time_us(&self) -> u64 {
        (self.frame_time * 1e6).round() as u64
    }
}

pub fn load_bvh(path: impl AsRef<Path>, stream_id: u8) -> Result<BvhClip, BvhError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| BvhError::Io { path: path.display().to_string(), source })?;
    parse_bvh(&text, stream_id)
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), BvhError> {
        let last_line = self.items.last().map_or(1, |t| t.0);
        let t = self.items.get(self.pos).copied().ok_or_else(|| parse_err(last_line, "unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn expect(&mut self, word: &str) -> Result<usize, BvhError> {
        let (line, t) = self.next()?;
        if t.eq_ignore_ascii_case(word) {
            Ok(line)
        } else {
            Err(parse_err(line, format!("expected {word:?}, found {t:?}")))
        }
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let (line, t) = self.next()?;
        t.parse::<f64>().map_err(|_| parse_err(line, format!("expected a number, found {t:?}")))
    }
}

struct JointChannels {
    channels: Vec<Channel>,
    order: Option<RotationOrder>,
}

pub fn parse_bvh(text: &str, stream_id: u8) -> Result<BvhClip, BvhError> {
    let lines: Vec<&str> = text.lines().collect();
    let motion_line = lines
        .iter()
        .position(|l| l.trim().eq_ignore_ascii_case("MOTION"))
        .ok_or_else(|| parse_err(lines.len().max(1), "missing MOTION section"))?;

    let mut toks = Tokens {
        items: lines[..motion_line]
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect(),
        pos: 0,
    };
    toks.expect("HIERARCHY")?;
    let mut joints = Vec::new();
    let mut chans = Vec::new();
    toks.expect("ROOT")?;
    parse_joint(&mut toks, None, &mut joints, &mut chans)?;
    if let Some(t) = toks.peek() {
        let line = toks.items[toks.pos].0;
        return Err(parse_err(line, format!("unexpected {t:?} after root joint")));
    }
    let topology = SkeletonTopology::new(joints)?;

    // MOTION
    let mut idx = motion_line + 1;
    let mut header = |key: &str| -> Result<String, BvhError> {
        while idx < lines.len() && lines[idx].trim().is_empty() {
            idx += 1;
        }
        let line = lines.get(idx).ok_or_else(|| parse_err(idx + 1, format!("missing {key:?}")))?;
        let trimmed = line.trim();
        let rest = trimmed
            .get(..key.len())
            .filter(|p| p.eq_ignore_ascii_case(key))
            .map(|_| trimmed[key.len()..].trim().to_string())
            .ok_or_else(|| parse_err(idx + 1, format!("expected {key:?}")))?;
        idx += 1;
        Ok(rest)
    };
    let frames_decl = header("Frames:")?;
    let ft = header("Frame Time:")?;
    let frame_count: usize =
        frames_decl.parse().map_err(|_| parse_err(idx - 1, format!("bad frame count {frames_decl:?}")))?;
    let frame_time: f64 = ft.parse().map_err(|_| parse_err(idx, format!("bad frame time {ft:?}")))?;
    if !(frame_time > 0.0) {
        return Err(parse_err(idx, "frame time must be positive"));
    }
    let frame_time_us = (frame_time * 1e6).round() as u64;

    let total: usize = chans.iter().map(|c: &JointChannels| c.channels.len()).sum();
    let mut frames = Vec::with_capacity(frame_count);
    let mut values = Vec::with_capacity(total);
    while frames.len() < frame_count {
        let Some(line) = lines.get(idx) else {
            return Err(parse_err(idx, format!("expected {frame_count} frames, found {}", frames.len())));
        };
        idx += 1;
        if line.trim().is_empty() {
            continue;
        }
        values.clear();
        for t in line.split_whitespace() {
            values.push(t.parse::<f64>().map_err(|_| parse_err(idx, format!("bad value {t:?}")))?);
        }
        if values.len() != total {
            return Err(parse_err(idx, format!("expected {total} values, found {}", values.len())));
        }
        let mut root = [0.0; 3];
        let mut rots = Vec::with_capacity(chans.len());
        let mut k = 0;
        for (j, jc) in chans.iter().enumerate() {
            let mut angles = [0.0; 3];
            for c in &jc.channels {
                match *c {
                    Channel::Pos(axis) if j == 0 => root[axis] = values[k],
                    Channel::Pos(_) => {}
                    Channel::Rot(a) => angles[(a - b'X') as usize] = values[k],
                }
                k += 1;
            }
            rots.push(match jc.order {
                Some(o) => o.to_quat(angles[0], angles[1], angles[2]),
                None => UnitQuat::IDENTITY,
            });
        }
        let n = frames.len() as u64;
        frames.push(MocapFrame::new(stream_id, n as u32, n * frame_time_us, Vec3::from(root), rots));
    }
    Ok(BvhClip { topology, frames, frame_time })
}

fn parse_joint(
    toks: &mut Tokens,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
    chans: &mut Vec<JointChannels>,
) -> Result<(), BvhError> {
    let (_, name) = toks.next()?;
    let name = name.to_string();
    toks.expect("{")?;
    toks.expect("OFFSET")?;
    let offset = Vec3::new(toks.number()?, toks.number()?, toks.number()?);
    let index = joints.len();
    joints.push(Joint { name: name.clone(), parent, bind_offset: offset });

    let line = toks.expect("CHANNELS")?;
    let n = toks.number()?;
    if n < 0.0 || n.fract() != 0.0 {
        return Err(parse_err(line, format!("bad channel count {n}")));
    }
    let mut channels = Vec::new();
    let mut rot_axes = Vec::new();
    for _ in 0..n as usize {
        let (line, c) = toks.next()?;
        let ch = match c.to_ascii_lowercase().as_str() {
            "xposition" => Channel::Pos(0),
            "yposition" => Channel::Pos(1),
            "zposition" => Channel::Pos(2),
            "xrotation" => Channel::Rot(b'X'),
            "yrotation" => Channel::Rot(b'Y'),
            "zrotation" => Channel::Rot(b'Z'),
            _ => return Err(parse_err(line, format!("unknown channel {c:?}"))),
        };
        if let Channel::Rot(a) = ch {
            rot_axes.push(a);
        }
        channels.push(ch);
    }
    let order = match rot_axes.as_slice() {
        [] => None,
        b"ZXY" => Some(RotationOrder::Zxy),
        b"XYZ" => Some(RotationOrder::Xyz),
        b"ZYX" => Some(RotationOrder::Zyx),
        other => {
            return Err(BvhError::UnsupportedChannelOrder {
                joint: name,
                order: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };
    chans.push(JointChannels { channels, order });

    loop {
        let (line, t) = toks.next()?;
        match t.to_ascii_uppercase().as_str() {
            "}" => return Ok(()),
            "JOINT" => parse_joint(toks, Some(index), joints, chans)?,
            "END" => {
                toks.expect("Site")?;
                toks.expect("{")?;
                toks.expect("OFFSET")?;
                for _ in 0..3 {
                    toks.number()?;
                }
                toks.expect("}")?;
            }
            _ => return Err(parse_err(line, format!("unexpected {t:?} in joint {name}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_joint(frames: usize, order: &str) -> String {
        let mut s = format!(
            "HIERARCHY\nROOT Hips\n{{\n  OFFSET 0 1 0\n  CHANNELS 6 Xposition Yposition Zposition {order}\n  JOINT Head\n  {{\n    OFFSET 0 0.5 0\n    CHANNELS 3 {order}\n    End Site\n    {{\n      OFFSET 0 0.1 0\n    }}\n  }}\n}}\nMOTION\nFrames: {frames}\nFrame Time: 0.01\n"
        );
        for _ in 0..frames {
            s.push_str("0 1 0 0 0 0 0 0 0\n");
        }
        s
    }

    #[test]
    fn zero_rotations_give_identity() {
        let clip = parse_bvh(&two_joint(10, "Zrotation Xrotation Yrotation"), 0).unwrap();
        assert_eq!(clip.frames.len(), 10);
        assert_eq!(clip.topology.len(), 2);
        for f in &clip.frames {
            assert!(f.joint_rotations.iter().all(|q| *q == UnitQuat::IDENTITY));
            assert_eq!(f.root_position, Vec3::new(0.0, 1.0, 0.0));
        }
        assert_eq!(clip.frames[3].timestamp_us, 30_000);
    }

    #[test]
    fn single_z_rotation() {
        let text = "HIERARCHY\nROOT J\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n}\nMOTION\nFrames: 1\nFrame Time: 0.01\n90 0 0\n";
        let clip = parse_bvh(text, 0).unwrap();
        let q = clip.frames[0].joint_rotations[0];
        // half-angle of 90° about +Z
        let h = std::f64::consts::FRAC_PI_4;
        assert!((q.w() - h.cos()).abs() < 1e-6 && (q.z() - h.sin()).abs() < 1e-6);
        assert!(q.x().abs() < 1e-9 && q.y().abs() < 1e-9);
    }

    #[test]
    fn missing_motion() {
        let text = "HIERARCHY\nROOT J\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n}\n";
        assert!(matches!(parse_bvh(text, 0), Err(BvhError::Parse { .. })));
    }

    #[test]
    fn unsupported_order() {
        let err = parse_bvh(&two_joint(1, "Yrotation Xrotation Zrotation"), 0).unwrap_err();
        assert!(matches!(err, BvhError::UnsupportedChannelOrder { ref order, .. } if order == "YXZ"));
    }

    #[test]
    fn short_motion_reports_line() {
        let text = two_joint(2, "Zrotation Xrotation Yrotation").replacen("Frames: 2", "Frames: 3", 1);
        match parse_bvh(&text, 0) {
            Err(BvhError::Parse { message, .. }) => assert!(message.contains("frames")),
            other => panic!("{other:?}"),
        }
        let bad = two_joint(1, "Zrotation Xrotation Yrotation").replace("0 1 0 0 0 0 0 0 0", "0 1 0 0 0 x 0 0 0");
        match parse_bvh(&bad, 0) {
            Err(BvhError::Parse { line, .. }) => assert_eq!(line, 19),
            other => panic!("{other:?}"),
        }
    }
}
