//! Cue sheets: loading, manual and scheduled firing, fire counts.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::manipulator::{Channel, Owner};
use crate::pathfinder::Cell;
use crate::pose::{ReferenceTransform, Vec3};
use crate::stage::WatchTarget;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CueError {
    #[error("cue sheet is not valid JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("duplicate cue id {0:?}")]
    DuplicateCueId(String),
    #[error("{path}: unknown action kind {kind:?}")]
    UnknownActionKind { path: String, kind: String },
    #[error("{path}: {message}")]
    MalformedAction { path: String, message: String },
    #[error("cue {0:?} has no actions")]
    EmptyCue(String),
    #[error("unknown cue {0:?}")]
    UnknownCue(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueAction {
    SetRef { avatar: String, reference: ReferenceTransform },
    SetOwnership { avatar: String, channel: Channel, owner: Owner },
    StartPath { avatar: String, goal: Cell, speed: f64 },
    SetWatch { avatar: String, target: Option<WatchTarget> },
}

impl CueAction {
    pub fn avatar(&self) -> &str {
        match self {
            CueAction::SetRef { avatar, .. }
            | CueAction::SetOwnership { avatar, .. }
            | CueAction::StartPath { avatar, .. }
            | CueAction::SetWatch { avatar, .. } => avatar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub id: String,
    pub name: String,
    pub at_tick: Option<u64>,
    pub actions: Vec<CueAction>,
}

/// Validated cue list. Cues keep file order; scheduled ones are also
/// indexed by `(at_tick, file position)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CueSheet {
    cues: Vec<Cue>,
    schedule: Vec<usize>,
}

impl CueSheet {
    pub fn new(cues: Vec<Cue>) -> Result<Self, CueError> {
        let mut seen = HashSet::new();
        for c in &cues {
            if !seen.insert(c.id.as_str()) {
                return Err(CueError::DuplicateCueId(c.id.clone()));
            }
            if c.actions.is_empty() {
                return Err(CueError::EmptyCue(c.id.clone()));
            }
        }
        let mut schedule: Vec<usize> = (0..cues.len()).filter(|&i| cues[i].at_tick.is_some()).collect();
        schedule.sort_by_key(|&i| (cues[i].at_tick, i));
        Ok(Self { cues, schedule })
    }

    pub fn cues(&self) -> &[Cue] {
        &self.cues
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Cue> {
        self.cues.iter().find(|c| c.id == id)
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.cues.iter().position(|c| c.id == id)
    }

    /// Scheduled cues in firing order.
    pub fn scheduled(&self) -> impl Iterator<Item = &Cue> {
        self.schedule.iter().map(|&i| &self.cues[i])
    }
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    path: String,
}

impl<'a> Fields<'a> {
    fn err(&self, key: &str, message: impl Into<String>) -> CueError {
        CueError::MalformedAction { path: format!("{}.{key}", self.path), message: message.into() }
    }

    fn get(&self, key: &str) -> Result<&'a Value, CueError> {
        self.obj.get(key).ok_or_else(|| self.err(key, "missing"))
    }

    fn str(&self, key: &str) -> Result<&'a str, CueError> {
        self.get(key)?.as_str().ok_or_else(|| self.err(key, "expected a string"))
    }

    fn num(&self, key: &str) -> Result<f64, CueError> {
        self.get(key)?.as_f64().ok_or_else(|| self.err(key, "expected a number"))
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>, CueError> {
        match self.obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| self.err(key, "expected a number")),
        }
    }

    fn vec3(&self, key: &str) -> Result<Vec3, CueError> {
        vec3_at(self.get(key)?).ok_or_else(|| self.err(key, "expected [x, y, z]"))
    }
}

fn vec3_at(v: &Value) -> Option<Vec3> {
    let a = v.as_array()?;
    if a.len() != 3 {
        return None;
    }
    Some(Vec3::new(a[0].as_f64()?, a[1].as_f64()?, a[2].as_f64()?))
}

fn parse_watch(f: &Fields) -> Result<Option<WatchTarget>, CueError> {
    let v = match f.obj.get("target") {
        None | Some(Value::Null) => return Ok(None),
        Some(v) => v,
    };
    let obj = v.as_object().ok_or_else(|| f.err("target", "expected an object or null"))?;
    let t = Fields { obj, path: format!("{}.target", f.path) };
    Ok(Some(match t.str("kind")? {
        "avatar" => WatchTarget::Avatar { id: t.str("id")?.to_string() },
        "performer" => WatchTarget::Performer { pos: t.vec3("pos")? },
        "point" => WatchTarget::Point { pos: t.vec3("pos")? },
        other => return Err(t.err("kind", format!("unknown watch target kind {other:?}"))),
    }))
}

fn parse_action(v: &Value, path: String) -> Result<CueAction, CueError> {
    let obj = v
        .as_object()
        .ok_or_else(|| CueError::MalformedAction { path: path.clone(), message: "expected an object".into() })?;
    let f = Fields { obj, path };
    let kind = f.str("kind")?;
    let avatar = || f.str("avatar").map(str::to_string);
    Ok(match kind {
        "set_ref" => CueAction::SetRef {
            avatar: avatar()?,
            reference: ReferenceTransform::from_degrees(
                f.vec3("pos")?,
                f.opt_num("yaw_deg")?.unwrap_or(0.0),
                f.opt_num("pitch_deg")?.unwrap_or(0.0),
            ),
        },
        "set_ownership" => {
            let channel = f.str("channel")?.parse::<Channel>().map_err(|e| f.err("channel", e.to_string()))?;
            let partner = match obj.get("partner") {
                None | Some(Value::Null) => None,
                Some(p) => Some(p.as_str().ok_or_else(|| f.err("partner", "expected a string"))?),
            };
            let owner = Owner::from_parts(f.str("owner")?, f.opt_num("weight")?, partner)
                .map_err(|e| f.err("owner", e.to_string()))?;
            CueAction::SetOwnership { avatar: avatar()?, channel, owner }
        }
        "start_path" => {
            let goal = f.get("goal")?;
            let cell = goal
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some(Cell::new(a[0].as_u64()? as usize, a[1].as_u64()? as usize)))
                .ok_or_else(|| f.err("goal", "expected [col, row]"))?;
            let speed = f.num("speed")?;
            if !(speed > 0.0 && speed.is_finite()) {
                return Err(f.err("speed", "must be positive"));
            }
            CueAction::StartPath { avatar: avatar()?, goal: cell, speed }
        }
        "set_watch" => CueAction::SetWatch { avatar: avatar()?, target: parse_watch(&f)? },
        other => return Err(CueError::UnknownActionKind { path: format!("{}.kind", f.path), kind: other.to_string() }),
    })
}

/// Parses and validates a cue sheet document.
pub fn load_cue_sheet(json_text: &str) -> Result<CueSheet, CueError> {
    let doc: Value = serde_json::from_str(json_text).map_err(|e| CueError::Json(e.to_string()))?;
    let malformed = |path: String, message: &str| CueError::Malformed { path, message: message.into() };
    let list = doc
        .get("cues")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("cues".into(), "expected an array"))?;
    let mut cues = Vec::with_capacity(list.len());
    for (i, c) in list.iter().enumerate() {
        let path = format!("cues[{i}]");
        let obj = c.as_object().ok_or_else(|| malformed(path.clone(), "expected an object"))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(format!("{path}.id"), "expected a string"))?
            .to_string();
        let name = match obj.get("name") {
            None | Some(Value::Null) => id.clone(),
            Some(v) => v.as_str().ok_or_else(|| malformed(format!("{path}.name"), "expected a string"))?.to_string(),
        };
        let at_tick = match obj.get("at_tick") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().ok_or_else(|| malformed(format!("{path}.at_tick"), "expected a tick number"))?),
        };
        let actions = obj
            .get("actions")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(format!("{path}.actions"), "expected an array"))?
            .iter()
            .enumerate()
            .map(|(j, a)| parse_action(a, format!("{path}.actions[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        cues.push(Cue { id, name, at_tick, actions });
    }
    CueSheet::new(cues)
}

/// One action of a fired cue, in firing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredAction {
    pub tick_no: u64,
    pub cue: String,
    pub action_index: usize,
    pub action: CueAction,
}

/// Firing state over a sheet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CueEngine {
    sheet: CueSheet,
    fire_counts: Vec<u64>,
    next_scheduled: usize,
}

impl CueEngine {
    pub fn new(sheet: CueSheet) -> Self {
        let n = sheet.len();
        Self { sheet, fire_counts: vec![0; n], next_scheduled: 0 }
    }

    pub fn sheet(&self) -> &CueSheet {
        &self.sheet
    }

    pub fn fire_count(&self, id: &str) -> Option<u64> {
        self.sheet.position(id).map(|i| self.fire_counts[i])
    }

    /// Emits every action of cue `id` stamped with `tick_no`. Cues may be
    /// fired any number of times.
    pub fn fire(&mut self, id: &str, tick_no: u64) -> Result<Vec<FiredAction>, CueError> {
        let i = self.sheet.position(id).ok_or_else(|| CueError::UnknownCue(id.to_string()))?;
        Ok(self.fire_index(i, tick_no))
    }

    fn fire_index(&mut self, i: usize, tick_no: u64) -> Vec<FiredAction> {
        self.fire_counts[i] += 1;
        let cue = &self.sheet.cues[i];
        cue.actions
            .iter()
            .enumerate()
            .map(|(action_index, action)| FiredAction {
                tick_no,
                cue: cue.id.clone(),
                action_index,
                action: action.clone(),
            })
            .collect()
    }

    /// Fires scheduled cues whose tick has come, each exactly once.
    pub fn due(&mut self, tick_no: u64) -> Vec<FiredAction> {
        let mut out = Vec::new();
        while let Some(&i) = self.sheet.schedule.get(self.next_scheduled) {
            if self.sheet.cues[i].at_tick.is_some_and(|t| t > tick_no) {
                break;
            }
            self.next_scheduled += 1;
            out.extend(self.fire_index(i, tick_no));
        }
        out
    }

    /// Counts a fire seen in a recorded log without re-emitting it.
    pub fn note_fired(&mut self, id: &str) -> Result<(), CueError> {
        let i = self.sheet.position(id).ok_or_else(|| CueError::UnknownCue(id.to_string()))?;
        self.fire_counts[i] += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"cues":[
        {"id":"Q1","name":"enter","actions":[{"kind":"set_ref","avatar":"A1","pos":[1,0,2],"yaw_deg":90}]},
        {"id":"Q2","name":"own","actions":[{"kind":"set_ownership","avatar":"A1","channel":"ROOT_XY","owner":"manipulator"}]}
    ]}"#;

    #[test]
    fn loads_in_file_order() {
        let s = load_cue_sheet(TWO).unwrap();
        let ids: Vec<_> = s.cues().iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["Q1", "Q2"]);
        match &s.cues()[0].actions[0] {
            CueAction::SetRef { reference, .. } => assert!((reference.yaw() - std::f64::consts::FRAC_PI_2).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        let dup = r#"{"cues":[{"id":"Q1","actions":[{"kind":"set_watch","avatar":"A"}]},{"id":"Q1","actions":[{"kind":"set_watch","avatar":"A"}]}]}"#;
        assert_eq!(load_cue_sheet(dup), Err(CueError::DuplicateCueId("Q1".into())));
        let tele = r#"{"cues":[{"id":"Q1","actions":[{"kind":"teleport","avatar":"A"}]}]}"#;
        assert!(matches!(load_cue_sheet(tele), Err(CueError::UnknownActionKind { kind, .. }) if kind == "teleport"));
        let bad = r#"{"cues":[{"id":"Q1","actions":[{"kind":"start_path","avatar":"A","goal":[1],"speed":1}]}]}"#;
        assert_eq!(
            load_cue_sheet(bad),
            Err(CueError::MalformedAction { path: "cues[0].actions[0].goal".into(), message: "expected [col, row]".into() })
        );
        let empty = r#"{"cues":[{"id":"Q1","actions":[]}]}"#;
        assert_eq!(load_cue_sheet(empty), Err(CueError::EmptyCue("Q1".into())));
        assert!(matches!(load_cue_sheet("{"), Err(CueError::Json(_))));
    }

    #[test]
    fn watch_targets() {
        let s = load_cue_sheet(
            r#"{"cues":[{"id":"W","actions":[
                {"kind":"set_watch","avatar":"A1","target":{"kind":"performer","pos":[0,1.6,2]}},
                {"kind":"set_watch","avatar":"A1","target":null}]}]}"#,
        )
        .unwrap();
        let a = &s.cues()[0].actions;
        assert_eq!(
            a[0],
            CueAction::SetWatch { avatar: "A1".into(), target: Some(WatchTarget::Performer { pos: Vec3::new(0.0, 1.6, 2.0) }) }
        );
        assert_eq!(a[1], CueAction::SetWatch { avatar: "A1".into(), target: None });
    }

    #[test]
    fn fire_and_refire() {
        let mut e = CueEngine::new(load_cue_sheet(TWO).unwrap());
        let ev = e.fire("Q2", 7).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].tick_no, 7);
        e.fire("Q2", 9).unwrap();
        assert_eq!(e.fire_count("Q2"), Some(2));
        assert_eq!(e.fire("nope", 9), Err(CueError::UnknownCue("nope".into())));
    }

    #[test]
    fn scheduled_order_and_once() {
        let doc = r#"{"cues":[
            {"id":"late","at_tick":10,"actions":[{"kind":"set_watch","avatar":"A"}]},
            {"id":"b","at_tick":5,"actions":[{"kind":"set_watch","avatar":"A"}]},
            {"id":"a","at_tick":5,"actions":[{"kind":"set_watch","avatar":"A"}]}
        ]}"#;
        let mut e = CueEngine::new(load_cue_sheet(doc).unwrap());
        assert!(e.due(4).is_empty());
        let fired: Vec<_> = e.due(5).into_iter().map(|f| f.cue).collect();
        assert_eq!(fired, ["b", "a"]);
        assert!(e.due(5).is_empty());
        assert_eq!(e.due(20).len(), 1);
        assert_eq!(e.fire_count("late"), Some(1));
    }
}
