//! The tick loop: resolves every avatar's channels against the ownership
//! table, combining mocap, manipulator axes, path following and watch
//! targets into world poses.
//!
//! Within a tick, work happens in this order: ownership commands, cue
//! actions (scheduled cues, then manual fires, then direct actions), input
//! sampling, channel resolution, output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cue::{CueAction, CueEngine, CueSheet, FiredAction};
use crate::manipulator::{
    axes_to_delta, AxisInput, Channel, ConfigError, ManipulatorConfig, Owner, OwnershipTable,
    Partner,
};
use crate::mocap::MocapFrame;
use crate::pathfinder::{follow, plan, Cell, NavGrid, PlannedPath};
use crate::pose::{
    apply_delta, compose, forward_kinematics, ReferenceTransform, RootPose, SkeletonTopology, TransformDelta, UnitQuat,
    Vec3, WorldPose,
};
use crate::retarget::{retarget_pose, BoneMap};
use crate::stage::{clamp_to_volume, look_at_yaw, map_a_to_b, StageCalibration, WatchTarget};

pub const DEFAULT_TICK_HZ: u32 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarBinding {
    pub avatar_id: String,
    pub stream_id: u8,
    pub topology: SkeletonTopology,
    /// From the stream's skeleton to `topology`.
    pub bone_map: BoneMap,
    pub reference: ReferenceTransform,
    pub watch: Option<WatchTarget>,
}

/// Everything needed to rebuild a mixer from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub tick_hz: u32,
    pub manipulator: ManipulatorConfig,
    pub calibration: StageCalibration,
    pub nav_grid: Option<NavGrid>,
    /// Source skeleton of every stream.
    pub streams: BTreeMap<u8, SkeletonTopology>,
    pub avatars: Vec<AvatarBinding>,
    pub cue_sheet: CueSheet,
}

impl EngineConfig {
    pub fn new(streams: BTreeMap<u8, SkeletonTopology>) -> Self {
        Self {
            tick_hz: DEFAULT_TICK_HZ,
            manipulator: ManipulatorConfig::default(),
            calibration: StageCalibration::default(),
            nav_grid: None,
            streams,
            avatars: Vec::new(),
            cue_sheet: CueSheet::default(),
        }
    }

    pub fn period_us(&self) -> u64 {
        1_000_000 / u64::from(self.tick_hz.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixerError {
    #[error("avatar {0:?} is already bound")]
    DuplicateAvatar(String),
    #[error("avatar {avatar:?} bound to unknown stream {stream}")]
    UnknownStream { avatar: String, stream: u8 },
    #[error("bone map of avatar {0:?} does not match its stream and topology")]
    BoneMapMismatch(String),
    #[error("at most {} avatars can be bound", u16::MAX)]
    TooManyAvatars,
    #[error("tick rate must be between 1 and 1000000 Hz, got {0}")]
    BadTickRate(u32),
    #[error(transparent)]
    Manipulator(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StreamSample {
    Frame(MocapFrame),
    Stale { silent_us: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    Action(CueAction),
    FireCue { id: String },
}

/// Inputs consumed by one tick. Streams and avatars absent from the maps
/// keep their previous frame and axes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickInputs {
    pub frames: BTreeMap<u8, StreamSample>,
    pub axes: BTreeMap<String, AxisInput>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick_no: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    CueAction { cue: String, action_index: usize, action: CueAction },
    /// A control-channel action applied outside any cue.
    Action { action: CueAction },
    ActionRejected { avatar: String, reason: String },
    UnknownCue { id: String },
    PathStarted { avatar: String, path: PlannedPath, speed: f64, start_us: u64 },
    PathFailed { avatar: String, reason: String },
    PathDone { avatar: String },
    StreamStale { stream: u8 },
    StreamRecovered { stream: u8 },
    FrameRejected { stream: u8, got: usize, expected: usize },
    VolumeExceeded { stream: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarPose {
    pub avatar: String,
    /// Position in binding order; the avatar's id on the pose bus.
    pub bus_id: u16,
    pub reference: ReferenceTransform,
    pub pose: WorldPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickOutput {
    pub tick_no: u64,
    pub poses: Vec<AvatarPose>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivePath {
    pub path: PlannedPath,
    pub speed: f64,
    pub start_us: u64,
    pub done: bool,
}

/// One channel value produced during a traced tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWrite {
    pub avatar: String,
    pub channel: Channel,
    pub owner: Owner,
    /// Ownership table revision the value was resolved against.
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub goal: Cell,
    pub speed: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarReport {
    pub id: String,
    pub stream: u8,
    pub reference: ReferenceTransform,
    pub position: Vec3,
    pub watch: Option<WatchTarget>,
    pub path: Option<PathReport>,
    pub ownership: BTreeMap<Channel, Owner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueReport {
    pub id: String,
    pub name: String,
    pub at_tick: Option<u64>,
    pub fire_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub stream: u8,
    pub last_frame_no: Option<u32>,
    pub stale: bool,
    pub clamped: bool,
}

/// Console-facing view of the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    /// Last completed tick.
    pub tick_no: Option<u64>,
    pub avatars: Vec<AvatarReport>,
    pub cues: Vec<CueReport>,
    pub streams: Vec<StreamReport>,
}

#[derive(Debug, Clone)]
struct AvatarState {
    binding: AvatarBinding,
    head: Option<usize>,
    path: Option<ActivePath>,
    position: Vec3,
}

#[derive(Debug, Clone, Default)]
struct StreamState {
    frame: Option<MocapFrame>,
    stale: bool,
    clamped: bool,
}

#[derive(Debug, Clone)]
pub struct Mixer {
    config: EngineConfig,
    period_us: u64,
    dt: f64,
    avatars: Vec<AvatarState>,
    ownership: OwnershipTable,
    cues: CueEngine,
    streams: BTreeMap<u8, StreamState>,
    axes: BTreeMap<String, AxisInput>,
    next_tick: u64,
    trace: Option<Vec<ChannelWrite>>,
}

impl Mixer {
    /// Builds a mixer and binds every avatar in `config`, in order.
    pub fn new(config: EngineConfig) -> Result<Self, MixerError> {
        if config.tick_hz == 0 || config.tick_hz > 1_000_000 {
            return Err(MixerError::BadTickRate(config.tick_hz));
        }
        config.manipulator.validate()?;
        let avatars = config.avatars.clone();
        let mut m = Self {
            period_us: config.period_us(),
            dt: 1.0 / f64::from(config.tick_hz),
            cues: CueEngine::new(config.cue_sheet.clone()),
            streams: config.streams.keys().map(|&k| (k, StreamState::default())).collect(),
            config: EngineConfig { avatars: Vec::new(), ..config },
            avatars: Vec::new(),
            ownership: OwnershipTable::new(),
            axes: BTreeMap::new(),
            next_tick: 0,
            trace: None,
        };
        for b in avatars {
            m.bind_avatar(b)?;
        }
        Ok(m)
    }

    /// Adds an avatar; it appears in every later tick. Bindings made here
    /// are part of [`Mixer::config`].
    pub fn bind_avatar(&mut self, binding: AvatarBinding) -> Result<(), MixerError> {
        let id = binding.avatar_id.clone();
        if self.ownership.contains(&id) {
            return Err(MixerError::DuplicateAvatar(id));
        }
        if self.avatars.len() >= u16::MAX as usize {
            return Err(MixerError::TooManyAvatars);
        }
        let Some(src) = self.config.streams.get(&binding.stream_id) else {
            return Err(MixerError::UnknownStream { avatar: id, stream: binding.stream_id });
        };
        if binding.bone_map.source_len() != src.len() || binding.bone_map.target_len() != binding.topology.len() {
            return Err(MixerError::BoneMapMismatch(id));
        }
        self.ownership.add_avatar(&id);
        self.config.avatars.push(binding.clone());
        self.avatars.push(AvatarState {
            head: binding.topology.head_index().filter(|&h| h > 0),
            position: binding.reference.translation(),
            binding,
            path: None,
        });
        Ok(())
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn period_us(&self) -> u64 {
        self.period_us
    }

    /// Number of the tick the next call to [`Mixer::tick`] will run.
    pub fn next_tick(&self) -> u64 {
        self.next_tick
    }

    /// Engine time of the next tick.
    pub fn now_us(&self) -> u64 {
        self.next_tick * self.period_us
    }

    pub fn ownership(&self) -> &OwnershipTable {
        &self.ownership
    }

    pub fn avatar_count(&self) -> usize {
        self.avatars.len()
    }

    pub fn reference(&self, avatar: &str) -> Option<ReferenceTransform> {
        self.find(avatar).map(|i| self.avatars[i].binding.reference)
    }

    pub fn watch(&self, avatar: &str) -> Option<&WatchTarget> {
        self.find(avatar).and_then(|i| self.avatars[i].binding.watch.as_ref())
    }

    pub fn cue_fire_count(&self, id: &str) -> Option<u64> {
        self.cues.fire_count(id)
    }

    /// Records every channel write of subsequent ticks.
    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    /// Channel writes of the last traced tick.
    pub fn last_trace(&self) -> &[ChannelWrite] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn find(&self, avatar: &str) -> Option<usize> {
        self.avatars.iter().position(|a| a.binding.avatar_id == avatar)
    }

    pub fn tick(&mut self, inputs: &TickInputs) -> TickOutput {
        let tick_no = self.next_tick;
        self.next_tick += 1;
        let now_us = tick_no * self.period_us;
        let mut events = Vec::new();
        if let Some(t) = &mut self.trace {
            t.clear();
        }

        for cmd in &inputs.commands {
            if let Command::Action(a @ CueAction::SetOwnership { .. }) = cmd {
                events.push(Event { tick_no, kind: EventKind::Action { action: a.clone() } });
                self.run_action(a, tick_no, now_us, &mut events);
            }
        }
        for f in self.cues.due(tick_no) {
            self.run_fired(f, now_us, &mut events);
        }
        for cmd in &inputs.commands {
            if let Command::FireCue { id } = cmd {
                match self.cues.fire(id, tick_no) {
                    Ok(fired) => fired.into_iter().for_each(|f| self.run_fired(f, now_us, &mut events)),
                    Err(_) => events.push(Event { tick_no, kind: EventKind::UnknownCue { id: id.clone() } }),
                }
            }
        }
        for cmd in &inputs.commands {
            match cmd {
                Command::Action(CueAction::SetOwnership { .. }) | Command::FireCue { .. } => {}
                Command::Action(a) => {
                    events.push(Event { tick_no, kind: EventKind::Action { action: a.clone() } });
                    self.run_action(a, tick_no, now_us, &mut events);
                }
            }
        }

        for (id, axes) in &inputs.axes {
            if self.ownership.contains(id) {
                self.axes.insert(id.clone(), axes.clamped());
            }
        }
        for (&stream, sample) in &inputs.frames {
            self.sample(stream, sample, tick_no, &mut events);
        }

        let revision = self.ownership.revision();
        let mut poses = Vec::with_capacity(self.avatars.len());
        for i in 0..self.avatars.len() {
            let (pose, done) = self.resolve_body(i, now_us, revision);
            if done {
                let avatar = self.avatars[i].binding.avatar_id.clone();
                events.push(Event { tick_no, kind: EventKind::PathDone { avatar } });
            }
            self.avatars[i].position = pose.position;
            poses.push(pose);
        }
        for i in 0..self.avatars.len() {
            self.resolve_head(i, &mut poses, revision);
        }
        debug_assert_eq!(revision, self.ownership.revision());

        let poses = poses
            .into_iter()
            .enumerate()
            .map(|(i, pose)| {
                let a = &self.avatars[i];
                AvatarPose { avatar: a.binding.avatar_id.clone(), bus_id: i as u16, reference: a.binding.reference, pose }
            })
            .collect();
        TickOutput { tick_no, poses, events }
    }

    fn run_fired(&mut self, f: FiredAction, now_us: u64, events: &mut Vec<Event>) {
        let tick_no = f.tick_no;
        events.push(Event {
            tick_no,
            kind: EventKind::CueAction { cue: f.cue, action_index: f.action_index, action: f.action.clone() },
        });
        self.run_action(&f.action, tick_no, now_us, events);
    }

    fn run_action(&mut self, action: &CueAction, tick_no: u64, now_us: u64, events: &mut Vec<Event>) {
        let avatar = action.avatar().to_string();
        let Some(i) = self.find(&avatar) else {
            events.push(Event { tick_no, kind: EventKind::ActionRejected { avatar, reason: "unknown avatar".into() } });
            return;
        };
        let CueAction::StartPath { goal, speed, .. } = action else {
            self.apply_effect(action);
            return;
        };
        let kind = match self.plan_from(i, *goal) {
            Ok(path) => {
                self.avatars[i].path = Some(ActivePath { path: path.clone(), speed: *speed, start_us: now_us, done: false });
                EventKind::PathStarted { avatar, path, speed: *speed, start_us: now_us }
            }
            Err(reason) => EventKind::PathFailed { avatar, reason },
        };
        events.push(Event { tick_no, kind });
    }

    fn plan_from(&self, i: usize, goal: Cell) -> Result<PlannedPath, String> {
        let grid = self.config.nav_grid.as_ref().ok_or("scene has no navigation grid")?;
        let start = grid.cell_at(self.avatars[i].binding.reference.translation()).map_err(|e| e.to_string())?;
        plan(grid, start, goal).map_err(|e| e.to_string())
    }

    /// Applies the state change of a non-path action. Returns false if the
    /// avatar is unknown.
    fn apply_effect(&mut self, action: &CueAction) -> bool {
        let Some(i) = self.find(action.avatar()) else {
            return false;
        };
        match action {
            CueAction::SetRef { reference, .. } => self.avatars[i].binding.reference = *reference,
            CueAction::SetOwnership { avatar, channel, owner } => {
                return self.ownership.set(avatar, *channel, *owner).is_ok();
            }
            CueAction::SetWatch { target, .. } => self.avatars[i].binding.watch = target.clone(),
            CueAction::StartPath { .. } => {}
        }
        true
    }

    /// Re-applies a recorded event's state change without ticking, so a
    /// session's control state can be rebuilt from its event log.
    pub fn apply_event(&mut self, event: &Event) {
        match &event.kind {
            EventKind::CueAction { cue, action_index, action } => {
                if *action_index == 0 {
                    let _ = self.cues.note_fired(cue);
                }
                self.apply_effect(action);
            }
            EventKind::Action { action } => {
                self.apply_effect(action);
            }
            EventKind::PathStarted { avatar, path, speed, start_us } => {
                if let Some(i) = self.find(avatar) {
                    self.avatars[i].path =
                        Some(ActivePath { path: path.clone(), speed: *speed, start_us: *start_us, done: false });
                }
            }
            EventKind::PathDone { avatar } => {
                if let Some(p) = self.find(avatar).and_then(|i| self.avatars[i].path.as_mut()) {
                    p.done = true;
                }
            }
            EventKind::StreamStale { stream } | EventKind::StreamRecovered { stream } => {
                if let Some(s) = self.streams.get_mut(stream) {
                    s.stale = matches!(event.kind, EventKind::StreamStale { .. });
                }
            }
            EventKind::ActionRejected { .. }
            | EventKind::UnknownCue { .. }
            | EventKind::PathFailed { .. }
            | EventKind::FrameRejected { .. }
            | EventKind::VolumeExceeded { .. } => {}
        }
    }

    fn sample(&mut self, stream: u8, sample: &StreamSample, tick_no: u64, events: &mut Vec<Event>) {
        let Some(expected) = self.config.streams.get(&stream).map(SkeletonTopology::len) else {
            return;
        };
        let volume = self.config.calibration.volume(stream).copied();
        let st = self.streams.entry(stream).or_default();
        let mut push = |kind| events.push(Event { tick_no, kind });
        match sample {
            StreamSample::Frame(f) => {
                if f.joint_rotations.len() != expected {
                    push(EventKind::FrameRejected { stream, got: f.joint_rotations.len(), expected });
                    return;
                }
                if st.stale {
                    st.stale = false;
                    push(EventKind::StreamRecovered { stream });
                }
                let mut f = f.clone();
                if let Some(vol) = volume {
                    let (p, clamped) = clamp_to_volume(f.root_position, &vol);
                    if clamped && !st.clamped {
                        push(EventKind::VolumeExceeded { stream });
                    }
                    st.clamped = clamped;
                    f.root_position = p;
                }
                st.frame = Some(f);
            }
            StreamSample::Stale { .. } => {
                if !st.stale {
                    st.stale = true;
                    push(EventKind::StreamStale { stream });
                }
            }
        }
    }

    fn record(&mut self, i: usize, channel: Channel, owner: Owner, revision: u64) {
        if let Some(t) = &mut self.trace {
            t.push(ChannelWrite { avatar: self.avatars[i].binding.avatar_id.clone(), channel, owner, revision });
        }
    }

    /// Root and limb channels of avatar `i`. Also reports whether its path
    /// finished on this tick.
    fn resolve_body(&mut self, i: usize, now_us: u64, revision: u64) -> (WorldPose, bool) {
        let row = *self.ownership.row(&self.avatars[i].binding.avatar_id).expect("bound avatars have a row");
        let [xy, vertical, yaw, pitch, limbs, _] = row;
        let axes = self.axes.get(&self.avatars[i].binding.avatar_id).copied().unwrap_or_default();
        let full = axes_to_delta(&axes, &self.config.manipulator, self.dt);

        let mut delta = TransformDelta::ZERO;
        if xy.drives_manipulator() {
            delta.d_forward = full.d_forward;
            delta.d_lateral = full.d_lateral;
        }
        if vertical.drives_manipulator() {
            delta.d_vertical = full.d_vertical;
        }
        if yaw.drives_manipulator() {
            delta.d_yaw = full.d_yaw;
        }
        if pitch.drives_manipulator() {
            delta.d_pitch = full.d_pitch;
        }

        let a = &mut self.avatars[i];
        let mut reference = apply_delta(&a.binding.reference, &delta);
        let mut finished = false;
        if let Some(p) = &mut a.path {
            let t = now_us.saturating_sub(p.start_us) as f64 / 1e6;
            let s = follow(&p.path, p.speed, t);
            if xy.drives_procedural() {
                let y = reference.translation().y;
                reference = reference.with_translation(Vec3::new(s.position.x, y, s.position.z));
            }
            if yaw.drives_procedural() {
                reference = reference.with_yaw(s.yaw);
            }
            if s.done && !p.done {
                p.done = true;
                finished = true;
            }
        }
        a.binding.reference = reference;

        let n = a.binding.topology.len();
        let frame = self.streams.get(&a.binding.stream_id).and_then(|s| s.frame.as_ref());
        let (local_pos, local_rot, mut joints) = match frame {
            Some(f) => {
                let r = retarget_pose(f, &a.binding.bone_map, &a.binding.topology)
                    .expect("frame sizes are checked on sampling");
                (r.root.position, r.root.rotation, r.joint_rotations)
            }
            None => (Vec3::ZERO, UnitQuat::IDENTITY, vec![UnitQuat::IDENTITY; n]),
        };

        let (s_xy, s_v) = (xy.mocap_share(), vertical.mocap_share());
        let local_pos = Vec3::new(local_pos.x * s_xy, local_pos.y * s_v, local_pos.z * s_xy);
        let (s_yaw, s_pitch) = (yaw.mocap_share(), pitch.mocap_share());
        let local_rot = if s_yaw == 1.0 && s_pitch == 1.0 {
            local_rot
        } else {
            let (y, p, r) = local_rot.to_yaw_pitch_roll();
            UnitQuat::from_yaw_pitch_roll(y * s_yaw, p * s_pitch, r)
        };
        let (position, rotation) = compose(&reference, &RootPose { position: local_pos, rotation: local_rot });
        joints[0] = local_rot;

        let head = a.head;
        for (j, q) in joints.iter_mut().enumerate().skip(1) {
            if Some(j) != head {
                *q = match limbs {
                    Owner::Mocap => *q,
                    Owner::Manipulator | Owner::Procedural => UnitQuat::IDENTITY,
                    Owner::Blend { weight, .. } => q.slerp(UnitQuat::IDENTITY, weight),
                };
            }
        }

        for (c, owner) in Channel::ALL.into_iter().zip(row).take(5) {
            self.record(i, c, owner, revision);
        }
        (WorldPose { position, rotation, joint_rotations: joints }, finished)
    }

    fn watch_point(&self, target: &WatchTarget, poses: &[WorldPose]) -> Option<Vec3> {
        match target {
            WatchTarget::Avatar { id } => self.find(id).map(|j| poses[j].position),
            WatchTarget::Performer { pos } => Some(map_a_to_b(*pos, &self.config.calibration)),
            WatchTarget::Point { pos } => Some(*pos),
        }
    }

    /// Head channel of avatar `i`, after every body is placed.
    fn resolve_head(&mut self, i: usize, poses: &mut [WorldPose], revision: u64) {
        let a = &self.avatars[i];
        let owner = self.ownership.get(&a.binding.avatar_id, Channel::Head).expect("bound avatars have a row");
        let Some(h) = a.head else {
            self.record(i, Channel::Head, owner, revision);
            return;
        };
        let mocap_head = poses[i].joint_rotations[h];
        let watched = match (&a.binding.watch, owner.drives_procedural()) {
            (Some(t), true) => self.watch_point(t, poses).and_then(|target| {
                let fk = forward_kinematics(&a.binding.topology, &poses[i]);
                let parent = a.binding.topology.joints()[h].parent.expect("head is not the root");
                let yaw = look_at_yaw(fk[h].0, target).ok()?;
                Some(fk[parent].1.inverse() * UnitQuat::from_yaw(yaw))
            }),
            _ => None,
        };
        poses[i].joint_rotations[h] = match (owner, watched) {
            (Owner::Blend { weight, .. }, Some(w)) => mocap_head.slerp(w, weight),
            (_, Some(w)) => w,
            (Owner::Manipulator, None) => UnitQuat::IDENTITY,
            (Owner::Blend { partner: Partner::Manipulator, weight }, None) => {
                mocap_head.slerp(UnitQuat::IDENTITY, weight)
            }
            _ => mocap_head,
        };
        self.record(i, Channel::Head, owner, revision);
    }

    pub fn snapshot(&self) -> StateReport {
        let avatars = self
            .avatars
            .iter()
            .map(|a| {
                let row = self.ownership.row(&a.binding.avatar_id).expect("bound avatars have a row");
                AvatarReport {
                    id: a.binding.avatar_id.clone(),
                    stream: a.binding.stream_id,
                    reference: a.binding.reference,
                    position: a.position,
                    watch: a.binding.watch.clone(),
                    path: a.path.as_ref().map(|p| PathReport {
                        goal: *p.path.cells.last().expect("paths are non-empty"),
                        speed: p.speed,
                        done: p.done,
                    }),
                    ownership: Channel::ALL.into_iter().zip(row.iter().copied()).collect(),
                }
            })
            .collect();
        let cues = self
            .cues
            .sheet()
            .cues()
            .iter()
            .map(|c| CueReport {
                id: c.id.clone(),
                name: c.name.clone(),
                at_tick: c.at_tick,
                fire_count: self.cues.fire_count(&c.id).unwrap_or(0),
            })
            .collect();
        let streams = self
            .streams
            .iter()
            .map(|(&stream, s)| StreamReport {
                stream,
                last_frame_no: s.frame.as_ref().map(|f| f.frame_no),
                stale: s.stale,
                clamped: s.clamped,
            })
            .collect();
        StateReport { tick_no: self.next_tick.checked_sub(1), avatars, cues, streams }
    }
}
