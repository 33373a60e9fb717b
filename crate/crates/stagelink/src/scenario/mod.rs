//! Scripted, self-checking exercises run offline against the engine.
//!
//! A scenario loads its scene and cue sheet from the assets directory,
//! drives the mixer with the scene's BVH streams and a scripted
//! manipulator, records the session and then checks the recorded log.
//! Timing and pose-bus delivery are measured while the scenario runs.

mod checks;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use serde::Serialize;
use stagelink_core::bus::{decode_pose_msg, encode_pose_msg, read_session, SessionError, SessionWriter};
use stagelink_core::mocap::{load_bvh, BvhError, BvhPlayback, StreamOrigin};
use stagelink_core::{
    bus::PoseMessage, load_cue_sheet, load_scene, AxisInput, CueError, Mixer, MixerError, SceneError, StreamSample,
    TickInputs,
};
use thiserror::Error;

pub use checks::{fanout_violations, head_watch_errors, paths_cross, WatchErrors};

pub const SCENARIOS: [&str; 3] = ["walking", "watching", "crowd"];

/// Capacity of the in-process pose bus between the tick loop and its reader.
const BUS_CAPACITY: usize = 4096;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (expected one of walking, watching, crowd)")]
    UnknownScenario(String),
    #[error("asset missing: {}", .0.display())]
    AssetMissing(PathBuf),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("cue sheet: {0}")]
    Cue(#[from] CueError),
    #[error(transparent)]
    Bvh(#[from] BvhError),
    #[error("stream {0} is a live UDP stream; scenarios need file streams")]
    LiveStream(u8),
    #[error(transparent)]
    Mixer(#[from] MixerError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ScenarioOptions {
    pub assets: PathBuf,
    /// Defaults to the scenario's own length.
    pub ticks: Option<u64>,
    /// Overrides the scene's tick rate.
    pub tick_hz: Option<u32>,
    /// Keeps every manipulator axis at zero.
    pub no_manipulator: bool,
    pub record: Option<PathBuf>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { assets: default_assets_dir(), ticks: None, tick_hz: None, no_manipulator: false, record: None }
    }
}

pub fn default_assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub message: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, message: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, message: message.into() }
    }
}

/// Wall-clock cost of one tick: mixing plus encoding and queueing its
/// pose messages. Microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TimingStats {
    pub mean_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl TimingStats {
    fn from_samples(mut us: Vec<f64>) -> Self {
        if us.is_empty() {
            return Self::default();
        }
        us.sort_by(f64::total_cmp);
        let n = us.len();
        let p99 = us[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
        Self { mean_us: us.iter().sum::<f64>() / n as f64, p99_us: p99, max_us: us[n - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub ticks: u64,
    pub avatars: usize,
    pub assertions: Vec<Assertion>,
    pub timing: TimingStats,
    pub poses_published: u64,
    pub poses_received: u64,
    pub poses_dropped: u64,
}

impl ScenarioReport {
    pub fn failed(&self) -> usize {
        self.assertions.iter().filter(|a| !a.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.failed() == 0
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}: {} ticks, {} avatars", self.scenario, self.ticks, self.avatars)?;
        for a in &self.assertions {
            writeln!(f, "  {} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.message)?;
        }
        let t = &self.timing;
        writeln!(
            f,
            "timing: mean {:.3} ms, p99 {:.3} ms, max {:.3} ms",
            t.mean_us / 1e3,
            t.p99_us / 1e3,
            t.max_us / 1e3
        )?;
        writeln!(
            f,
            "pose bus: {} published, {} received, {} dropped",
            self.poses_published, self.poses_received, self.poses_dropped
        )?;
        let total = self.assertions.len();
        write!(f, "result: {} ({}/{} assertions)", if self.passed() { "PASS" } else { "FAIL" }, total - self.failed(), total)
    }
}

/// Manipulator axes per avatar at a time in seconds; avatars left out keep
/// their previous axes.
type AxesScript = fn(f64) -> Vec<(&'static str, AxisInput)>;

struct Script {
    scene: &'static str,
    cues: &'static str,
    seconds: f64,
    axes: AxesScript,
}

fn forward_when(on: bool) -> AxisInput {
    AxisInput::forward(if on { 1.0 } else { 0.0 })
}

/// A1 walks 4.5 m, pauses, walks 3 m; A2 starts later and walks in two
/// legs across A1's line.
fn walking_axes(t: f64) -> Vec<(&'static str, AxisInput)> {
    vec![
        ("A1", forward_when((0.0..3.0).contains(&t) || (4.0..6.0).contains(&t))),
        ("A2", forward_when((1.5..3.5).contains(&t) || (4.5..7.0).contains(&t))),
    ]
}

/// A2 sidesteps back and forth so A1's gaze has to follow.
fn watching_axes(t: f64) -> Vec<(&'static str, AxisInput)> {
    let side = if (t / 2.0).floor() as i64 % 2 == 0 { 0.8 } else { -0.8 };
    vec![("A2", AxisInput::new(0.0, side, 0.0, 0.0, 0.0, 0))]
}

fn no_axes(_: f64) -> Vec<(&'static str, AxisInput)> {
    Vec::new()
}

fn script(name: &str) -> Option<Script> {
    Some(match name {
        "walking" => Script { scene: "walking.scene.json", cues: "walking.cues.json", seconds: 10.0, axes: walking_axes },
        "watching" => {
            Script { scene: "watching.scene.json", cues: "watching.cues.json", seconds: 15.0, axes: watching_axes }
        }
        "crowd" => Script { scene: "crowd.scene.json", cues: "crowd.cues.json", seconds: 30.0, axes: no_axes },
        _ => return None,
    })
}

struct BusStats {
    received: u64,
    out_of_order: u64,
    undecodable: u64,
}

/// Reader side of the in-process pose bus: decodes every message and
/// checks per-avatar tick order.
fn bus_reader(rx: mpsc::Receiver<Vec<u8>>) -> BusStats {
    let mut last: BTreeMap<u16, u64> = BTreeMap::new();
    let mut s = BusStats { received: 0, out_of_order: 0, undecodable: 0 };
    for bytes in rx {
        match decode_pose_msg(&bytes) {
            Ok(m) => {
                s.received += 1;
                if last.insert(m.avatar_id, m.tick_no).is_some_and(|prev| m.tick_no <= prev) {
                    s.out_of_order += 1;
                }
            }
            Err(_) => s.undecodable += 1,
        }
    }
    s
}

fn require(path: PathBuf) -> Result<PathBuf, ScenarioError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(ScenarioError::AssetMissing(path))
    }
}

pub fn run_scenario(name: &str, opts: &ScenarioOptions) -> Result<ScenarioReport, ScenarioError> {
    let script = script(name).ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
    let scene_path = require(opts.assets.join(script.scene))?;
    let cue_path = require(opts.assets.join(script.cues))?;

    let scene = match load_scene(&scene_path) {
        Err(SceneError::Io { path, .. }) => return Err(ScenarioError::AssetMissing(path.into())),
        Err(SceneError::Bvh(BvhError::Io { path, .. })) => return Err(ScenarioError::AssetMissing(path.into())),
        other => other?,
    };
    let mut config = scene.config;
    config.cue_sheet = load_cue_sheet(&std::fs::read_to_string(&cue_path)?)?;
    if let Some(hz) = opts.tick_hz {
        config.tick_hz = hz;
    }

    let mut players = BTreeMap::new();
    for (&id, src) in &scene.sources {
        let StreamOrigin::Bvh { path, rate_hz, looping } = &src.origin else {
            return Err(ScenarioError::LiveStream(id));
        };
        let clip = load_bvh(require(path.clone())?, id)?;
        let period = match rate_hz {
            Some(r) => (1e6 / r).round() as u64,
            None => clip.frame_time_us(),
        };
        players.insert(id, BvhPlayback::new(clip.frames, period, 0, *looping));
    }

    let mut mixer = Mixer::new(config.clone())?;
    let ticks = opts.ticks.unwrap_or((script.seconds * config.tick_hz as f64).round() as u64);
    let dt = 1.0 / config.tick_hz as f64;
    let mut writer = SessionWriter::new(Vec::new(), &config)?;

    let (tx, rx) = mpsc::sync_channel::<Vec<u8>>(BUS_CAPACITY);
    let reader = std::thread::spawn(move || bus_reader(rx));
    let mut published = 0u64;
    let mut dropped = 0u64;
    let mut held: BTreeMap<&str, AxisInput> = BTreeMap::new();
    let mut samples = Vec::with_capacity(ticks as usize);

    for tick in 0..ticks {
        let now_us = mixer.now_us();
        let mut inputs = TickInputs::default();
        for (&id, p) in &players {
            if let Some(f) = p.frame_at(now_us) {
                inputs.frames.insert(id, StreamSample::Frame(f));
            }
        }
        for (avatar, mut axes) in (script.axes)(tick as f64 * dt) {
            if opts.no_manipulator {
                axes = AxisInput::default();
            }
            axes.timestamp_us = 0;
            if held.insert(avatar, axes) != Some(axes) {
                inputs.axes.insert(avatar.to_string(), AxisInput { timestamp_us: now_us, ..axes });
            }
        }

        let started = Instant::now();
        let out = mixer.tick(&inputs);
        for p in &out.poses {
            let msg = PoseMessage::from_pose(out.tick_no, p.bus_id, &p.pose).expect("joint count fits the pose bus");
            match tx.try_send(encode_pose_msg(&msg)) {
                Ok(()) => published += 1,
                Err(_) => dropped += 1,
            }
        }
        samples.push(started.elapsed().as_secs_f64() * 1e6);
        writer.record(&inputs, &out)?;
    }
    drop(tx);
    let bus = reader.join().expect("pose bus reader panicked");

    let bytes = writer.finish()?;
    if let Some(path) = &opts.record {
        std::fs::write(path, &bytes)?;
    }
    let log = read_session(&bytes)?;

    let mut assertions = match name {
        "walking" => checks::walking(&log),
        "watching" => checks::watching(&log),
        _ => checks::crowd(&log),
    };
    let expected = ticks * config.avatars.len() as u64;
    assertions.push(Assertion::new(
        "pose_bus_delivery",
        dropped == 0 && bus.received == expected && bus.out_of_order == 0 && bus.undecodable == 0,
        format!(
            "{} of {expected} pose messages received, {dropped} dropped, {} out of order, {} undecodable",
            bus.received, bus.out_of_order, bus.undecodable
        ),
    ));
    let timing = TimingStats::from_samples(samples);
    if name == "crowd" {
        let budget_us = 1e6 / config.tick_hz as f64;
        assertions.push(Assertion::new(
            "realtime_budget",
            timing.mean_us < budget_us && timing.p99_us < budget_us,
            format!(
                "mean {:.3} ms, p99 {:.3} ms against a {:.1} ms tick",
                timing.mean_us / 1e3,
                timing.p99_us / 1e3,
                budget_us / 1e3
            ),
        ));
    }

    Ok(ScenarioReport {
        scenario: name.to_string(),
        ticks,
        avatars: config.avatars.len(),
        assertions,
        timing,
        poses_published: published,
        poses_received: bus.received,
        poses_dropped: dropped,
    })
}
