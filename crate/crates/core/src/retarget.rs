//! Name-based retargeting: copy local joint rotations from a source skeleton
//! onto a target skeleton through a bone map. No bone-length compensation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mocap::MocapFrame;
use crate::pose::{RootPose, SkeletonTopology, UnitQuat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetargetError {
    #[error("bone map is not valid JSON of the form {{\"map\": {{...}}}}: {0}")]
    Json(String),
    #[error("unknown source joint {0:?}")]
    UnknownSourceJoint(String),
    #[error("unknown target joint {0:?}")]
    UnknownTargetJoint(String),
    #[error("target joint {0:?} mapped more than once")]
    DuplicateTarget(String),
    #[error("frame has {got} joints, source topology has {expected}")]
    TopologyMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoneMapEntry {
    pub source: String,
    pub target: String,
    pub source_index: usize,
    pub target_index: usize,
}

/// Validated source→target joint mapping, injective on targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoneMap {
    entries: Vec<BoneMapEntry>,
    source_len: usize,
    target_len: usize,
}

#[derive(Deserialize)]
struct BoneMapFile {
    map: serde_json::Map<String, serde_json::Value>,
}

impl BoneMap {
    fn build<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
        src: &SkeletonTopology,
        dst: &SkeletonTopology,
    ) -> Result<Self, RetargetError> {
        let mut entries = Vec::new();
        let mut used = HashSet::new();
        for (s, t) in pairs {
            let source_index = src.index_of(s).ok_or_else(|| RetargetError::UnknownSourceJoint(s.into()))?;
            let target_index = dst.index_of(t).ok_or_else(|| RetargetError::UnknownTargetJoint(t.into()))?;
            if !used.insert(target_index) {
                return Err(RetargetError::DuplicateTarget(t.into()));
            }
            entries.push(BoneMapEntry { source: s.into(), target: t.into(), source_index, target_index });
        }
        Ok(Self { entries, source_len: src.len(), target_len: dst.len() })
    }

    /// Maps every joint whose name appears in both skeletons to itself.
    pub fn by_name(src: &SkeletonTopology, dst: &SkeletonTopology) -> Self {
        let pairs = src
            .joints()
            .iter()
            .filter(|j| dst.index_of(&j.name).is_some())
            .map(|j| (j.name.as_str(), j.name.as_str()));
        Self::build(pairs, src, dst).expect("names are unique in both topologies")
    }

    pub fn empty(src: &SkeletonTopology, dst: &SkeletonTopology) -> Self {
        Self { entries: Vec::new(), source_len: src.len(), target_len: dst.len() }
    }

    pub fn entries(&self) -> &[BoneMapEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    /// Target joint index driven by source joint `source_index`, if mapped.
    pub fn target_of(&self, source_index: usize) -> Option<usize> {
        self.entries.iter().find(|e| e.source_index == source_index).map(|e| e.target_index)
    }
}

/// Parses `{"map": {"SrcJoint": "dst_joint", ...}}` and checks every name.
pub fn load_bone_map(
    json_text: &str,
    src: &SkeletonTopology,
    dst: &SkeletonTopology,
) -> Result<BoneMap, RetargetError> {
    let file: BoneMapFile = serde_json::from_str(json_text).map_err(|e| RetargetError::Json(e.to_string()))?;
    let mut pairs = Vec::with_capacity(file.map.len());
    for (k, v) in &file.map {
        let t = v.as_str().ok_or_else(|| RetargetError::Json(format!("target for {k:?} is not a string")))?;
        pairs.push((k.as_str(), t));
    }
    BoneMap::build(pairs, src, dst)
}

/// Retargeted pose in the target skeleton's joint order.
#[derive(Debug, Clone, PartialEq)]
pub struct RetargetedPose {
    pub root: RootPose,
    pub joint_rotations: Vec<UnitQuat>,
}

/// Copies mapped rotations; unmapped target joints get the bind pose.
/// The root position is taken from the frame and the root rotation is the
/// target root joint's resulting rotation.
pub fn retarget_pose(frame: &MocapFrame, map: &BoneMap, dst: &SkeletonTopology) -> Result<RetargetedPose, RetargetError> {
    if frame.joint_rotations.len() != map.source_len {
        return Err(RetargetError::TopologyMismatch { got: frame.joint_rotations.len(), expected: map.source_len });
    }
    let mut joint_rotations = vec![UnitQuat::IDENTITY; dst.len()];
    for e in &map.entries {
        if let Some(slot) = joint_rotations.get_mut(e.target_index) {
            *slot = frame.joint_rotations[e.source_index];
        }
    }
    Ok(RetargetedPose {
        root: RootPose { position: frame.root_position, rotation: joint_rotations[0] },
        joint_rotations,
    })
}
