//! Scene files: stage calibration, streams, avatars and the navigation grid.
//!
//! Relative paths inside a scene are resolved against the scene file's
//! directory. Skeletons are read from BVH hierarchies; a rig file may have
//! zero frames.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::manipulator::ManipulatorConfig;
use crate::mixer::{AvatarBinding, EngineConfig, DEFAULT_TICK_HZ};
use crate::mocap::{load_bvh, BvhClip, BvhError, StreamOrigin, StreamSource, DEFAULT_MOCAP_PORT};
use crate::pathfinder::{NavGrid, PathError};
use crate::pose::{ReferenceTransform, Vec3};
use crate::retarget::{load_bone_map, BoneMap, RetargetError};
use crate::stage::{RigidTransform, StageCalibration, Volume, WatchTarget};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scene file: {0}")]
    Json(String),
    #[error(transparent)]
    Bvh(#[from] BvhError),
    #[error("navigation grid: {0}")]
    Grid(#[from] PathError),
    #[error("bone map of avatar {avatar:?}: {source}")]
    BoneMap { avatar: String, source: RetargetError },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    tick_hz: Option<u32>,
    #[serde(default)]
    manipulator: ManipulatorConfig,
    #[serde(default)]
    c_volumes: BTreeMap<u8, Volume>,
    #[serde(default)]
    a_to_b: RawAtoB,
    nav_grid: Option<PathBuf>,
    #[serde(default)]
    streams: BTreeMap<u8, RawStream>,
    avatars: Vec<RawAvatar>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAtoB {
    #[serde(default)]
    translation: Vec3,
    #[serde(default)]
    yaw_deg: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStream {
    topology: PathBuf,
    bvh: Option<PathBuf>,
    rate_hz: Option<f64>,
    #[serde(rename = "loop", default)]
    looping: bool,
    udp: Option<u16>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRef {
    #[serde(default)]
    pos: Vec3,
    #[serde(default)]
    yaw_deg: f64,
    #[serde(default)]
    pitch_deg: f64,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawWatch {
    Avatar { id: String },
    Performer { pos: Vec3 },
    Point { pos: Vec3 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAvatar {
    id: String,
    topology: PathBuf,
    bone_map: Option<PathBuf>,
    stream: u8,
    #[serde(rename = "ref", default)]
    reference: RawRef,
    watch: Option<RawWatch>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    /// Engine configuration with an empty cue sheet.
    pub config: EngineConfig,
    pub sources: BTreeMap<u8, StreamSource>,
}

struct Loader {
    base: PathBuf,
    clips: BTreeMap<PathBuf, BvhClip>,
}

impl Loader {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn read(&self, p: &Path) -> Result<String, SceneError> {
        let full = self.path(p);
        std::fs::read_to_string(&full).map_err(|source| SceneError::Io { path: full.display().to_string(), source })
    }

    fn clip(&mut self, p: &Path) -> Result<&BvhClip, SceneError> {
        let full = self.path(p);
        if !self.clips.contains_key(&full) {
            let clip = load_bvh(&full, 0)?;
            self.clips.insert(full.clone(), clip);
        }
        Ok(&self.clips[&full])
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
    parse_scene(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_scene(text: &str, base_dir: &Path) -> Result<Scene, SceneError> {
    let raw: RawScene = serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))?;
    let mut ld = Loader { base: base_dir.to_path_buf(), clips: BTreeMap::new() };

    let mut streams = BTreeMap::new();
    let mut sources = BTreeMap::new();
    for (&id, s) in &raw.streams {
        let topology = ld.clip(&s.topology)?.topology.clone();
        let origin = match (&s.bvh, s.udp) {
            (Some(_), Some(_)) => {
                return Err(SceneError::Invalid(format!("stream {id} has both a BVH file and a UDP port")))
            }
            (Some(b), None) => StreamOrigin::Bvh { path: ld.path(b), rate_hz: s.rate_hz, looping: s.looping },
            (None, port) => StreamOrigin::Udp { port: port.unwrap_or(DEFAULT_MOCAP_PORT) },
        };
        streams.insert(id, topology.clone());
        sources.insert(id, StreamSource { topology, origin });
    }

    let mut avatars = Vec::with_capacity(raw.avatars.len());
    for a in &raw.avatars {
        let topology = ld.clip(&a.topology)?.topology.clone();
        let src = streams
            .entry(a.stream)
            .or_insert_with(|| {
                sources.insert(
                    a.stream,
                    StreamSource { topology: topology.clone(), origin: StreamOrigin::Udp { port: DEFAULT_MOCAP_PORT } },
                );
                topology.clone()
            })
            .clone();
        let bone_map = match &a.bone_map {
            None => BoneMap::by_name(&src, &topology),
            Some(p) => load_bone_map(&ld.read(p)?, &src, &topology)
                .map_err(|source| SceneError::BoneMap { avatar: a.id.clone(), source })?,
        };
        let r = &a.reference;
        avatars.push(AvatarBinding {
            avatar_id: a.id.clone(),
            stream_id: a.stream,
            topology,
            bone_map,
            reference: ReferenceTransform::from_degrees(r.pos, r.yaw_deg, r.pitch_deg),
            watch: a.watch.as_ref().map(|w| match w {
                RawWatch::Avatar { id } => WatchTarget::Avatar { id: id.clone() },
                RawWatch::Performer { pos } => WatchTarget::Performer { pos: *pos },
                RawWatch::Point { pos } => WatchTarget::Point { pos: *pos },
            }),
        });
    }

    let nav_grid = match &raw.nav_grid {
        Some(p) => Some(NavGrid::parse(&ld.read(p)?)?),
        None => None,
    };
    let config = EngineConfig {
        tick_hz: raw.tick_hz.unwrap_or(DEFAULT_TICK_HZ),
        manipulator: raw.manipulator,
        calibration: StageCalibration {
            c_volumes: raw.c_volumes,
            a_to_b: RigidTransform { translation: raw.a_to_b.translation, yaw: raw.a_to_b.yaw_deg.to_radians() },
        },
        nav_grid,
        streams,
        avatars,
        cue_sheet: Default::default(),
    };
    Ok(Scene { config, sources })
}
