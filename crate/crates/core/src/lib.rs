//! Core of the stagelink engine: mocap ingestion, reference-transform
//! composition, channel ownership, cueing, path following and the wire
//! formats around them.
//!
//! Everything here is synchronous and deterministic; networking lives in
//! the `stagelink` binary crate.

pub mod bus;
pub mod cue;
pub mod manipulator;
pub mod mixer;
pub mod mocap;
pub mod pathfinder;
pub mod pose;
pub mod retarget;
pub mod scene;
pub mod stage;

pub use cue::{load_cue_sheet, Cue, CueAction, CueEngine, CueError, CueSheet};
pub use manipulator::{axes_to_delta, AxisInput, Channel, ManipulatorConfig, Owner, OwnershipTable, Partner};
pub use mixer::{
    AvatarBinding, AvatarPose, Command, EngineConfig, Event, EventKind, Mixer, MixerError, StateReport, StreamSample,
    TickInputs, TickOutput,
};
pub use mocap::MocapFrame;
pub use pathfinder::{follow, plan, Cell, NavGrid, PathError, PlannedPath};
pub use pose::{
    apply_delta, compose, heading_frame, ReferenceTransform, RootPose, SkeletonTopology, TransformDelta, UnitQuat,
    Vec3, WorldPose,
};
pub use retarget::{load_bone_map, retarget_pose, BoneMap};
pub use scene::{load_scene, Scene, SceneError};
pub use stage::{clamp_to_volume, look_at_yaw, map_a_to_b, StageCalibration, Volume, WatchTarget};
