//! Synthetic test material: a 50-joint performer skeleton walking a small
//! figure eight, a 20-joint puppet rig and the bone map between them.
//!
//! The committed files under `assets/` are produced by these functions
//! (`cargo run --example gen_fixtures`); a test keeps them in sync.

use std::f64::consts::TAU;
use std::fmt::Write as _;

struct Node {
    name: &'static str,
    offset: [f64; 3],
    children: Vec<Node>,
    /// Offset of the End Site, for leaves.
    end: Option<[f64; 3]>,
}

fn node(name: &'static str, offset: [f64; 3], children: Vec<Node>) -> Node {
    Node { name, offset, children, end: None }
}

fn leaf(name: &'static str, offset: [f64; 3], end: [f64; 3]) -> Node {
    Node { name, offset, children: Vec::new(), end: Some(end) }
}

fn arm(side: &'static [&'static str; 16], s: f64) -> Node {
    let finger = |i: usize, z: f64| {
        node(side[4 + i * 3], [s * 0.04, 0.0, z], vec![node(side[5 + i * 3], [s * 0.03, 0.0, 0.0], vec![leaf(
            side[6 + i * 3],
            [s * 0.025, 0.0, 0.0],
            [s * 0.02, 0.0, 0.0],
        )])])
    };
    node(side[0], [s * 0.05, 0.08, 0.0], vec![node(side[1], [s * 0.12, 0.0, 0.0], vec![node(
        side[2],
        [s * 0.28, 0.0, 0.0],
        vec![node(side[3], [s * 0.25, 0.0, 0.0], vec![finger(0, 0.03), finger(1, 0.01), finger(2, -0.01), finger(3, -0.03)])],
    )])])
}

fn leg(names: [&'static str; 5], s: f64) -> Node {
    node(names[0], [s * 0.09, -0.05, 0.0], vec![node(names[1], [0.0, -0.42, 0.0], vec![node(
        names[2],
        [0.0, -0.42, 0.0],
        vec![node(names[3], [0.0, -0.05, 0.12], vec![leaf(names[4], [0.0, 0.0, 0.06], [0.0, 0.0, 0.03])])],
    )])])
}

const LEFT_ARM: [&str; 16] = [
    "LeftShoulder", "LeftArm", "LeftForeArm", "LeftHand",
    "LeftHandThumb1", "LeftHandThumb2", "LeftHandThumb3",
    "LeftHandIndex1", "LeftHandIndex2", "LeftHandIndex3",
    "LeftHandMiddle1", "LeftHandMiddle2", "LeftHandMiddle3",
    "LeftHandRing1", "LeftHandRing2", "LeftHandRing3",
];
const RIGHT_ARM: [&str; 16] = [
    "RightShoulder", "RightArm", "RightForeArm", "RightHand",
    "RightHandThumb1", "RightHandThumb2", "RightHandThumb3",
    "RightHandIndex1", "RightHandIndex2", "RightHandIndex3",
    "RightHandMiddle1", "RightHandMiddle2", "RightHandMiddle3",
    "RightHandRing1", "RightHandRing2", "RightHandRing3",
];

fn performer() -> Node {
    let head = node("Head", [0.0, 0.1, 0.0], vec![leaf("Jaw", [0.0, -0.03, 0.08], [0.0, 0.0, 0.05])]);
    let chest = node("Spine3", [0.0, 0.1, 0.0], vec![
        node("Neck", [0.0, 0.15, 0.0], vec![head]),
        arm(&LEFT_ARM, 1.0),
        arm(&RIGHT_ARM, -1.0),
    ]);
    let spine = node("Spine", [0.0, 0.1, 0.0], vec![node("Spine1", [0.0, 0.1, 0.0], vec![node(
        "Spine2",
        [0.0, 0.1, 0.0],
        vec![chest],
    )])]);
    node("Hips", [0.0, 0.0, 0.0], vec![
        spine,
        leg(["LeftUpLeg", "LeftLeg", "LeftFoot", "LeftToeBase", "LeftToeEnd"], 1.0),
        leg(["RightUpLeg", "RightLeg", "RightFoot", "RightToeBase", "RightToeEnd"], -1.0),
    ])
}

fn puppet() -> Node {
    let arm = |n: [&'static str; 4], s: f64| {
        node(n[0], [s * 0.04, 0.06, 0.0], vec![node(n[1], [s * 0.09, 0.0, 0.0], vec![node(
            n[2],
            [s * 0.2, 0.0, 0.0],
            vec![leaf(n[3], [s * 0.18, 0.0, 0.0], [s * 0.08, 0.0, 0.0])],
        )])])
    };
    let leg = |n: [&'static str; 3], s: f64| {
        node(n[0], [s * 0.07, -0.04, 0.0], vec![node(n[1], [0.0, -0.3, 0.0], vec![leaf(
            n[2],
            [0.0, -0.3, 0.0],
            [0.0, -0.04, 0.1],
        )])])
    };
    node("pelvis", [0.0, 0.0, 0.0], vec![
        node("spine_01", [0.0, 0.12, 0.0], vec![node("spine_02", [0.0, 0.14, 0.0], vec![
            node("neck", [0.0, 0.12, 0.0], vec![leaf("head", [0.0, 0.1, 0.0], [0.0, 0.2, 0.0])]),
            arm(["clavicle_l", "upperarm_l", "lowerarm_l", "hand_l"], 1.0),
            arm(["clavicle_r", "upperarm_r", "lowerarm_r", "hand_r"], -1.0),
        ])]),
        leg(["thigh_l", "calf_l", "foot_l"], 1.0),
        leg(["thigh_r", "calf_r", "foot_r"], -1.0),
        leaf("tail", [0.0, 0.0, -0.1], [0.0, -0.05, -0.3]),
    ])
}

const PUPPET_MAP: [(&str, &str); 19] = [
    ("Hips", "pelvis"),
    ("Spine", "spine_01"),
    ("Spine2", "spine_02"),
    ("Neck", "neck"),
    ("Head", "head"),
    ("LeftShoulder", "clavicle_l"),
    ("LeftArm", "upperarm_l"),
    ("LeftForeArm", "lowerarm_l"),
    ("LeftHand", "hand_l"),
    ("RightShoulder", "clavicle_r"),
    ("RightArm", "upperarm_r"),
    ("RightForeArm", "lowerarm_r"),
    ("RightHand", "hand_r"),
    ("LeftUpLeg", "thigh_l"),
    ("LeftLeg", "calf_l"),
    ("LeftFoot", "foot_l"),
    ("RightUpLeg", "thigh_r"),
    ("RightLeg", "calf_r"),
    ("RightFoot", "foot_r"),
];

fn write_node(out: &mut String, n: &Node, depth: usize, root: bool, names: &mut Vec<&'static str>) {
    let pad = "  ".repeat(depth);
    let [x, y, z] = n.offset;
    let _ = writeln!(out, "{pad}{} {}", if root { "ROOT" } else { "JOINT" }, n.name);
    let _ = writeln!(out, "{pad}{{");
    let _ = writeln!(out, "{pad}  OFFSET {x:.4} {y:.4} {z:.4}");
    if root {
        let _ = writeln!(out, "{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation");
    } else {
        let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Xrotation Yrotation");
    }
    names.push(n.name);
    for c in &n.children {
        write_node(out, c, depth + 1, false, names);
    }
    if let Some([x, y, z]) = n.end {
        let _ = writeln!(out, "{pad}  End Site");
        let _ = writeln!(out, "{pad}  {{");
        let _ = writeln!(out, "{pad}    OFFSET {x:.4} {y:.4} {z:.4}");
        let _ = writeln!(out, "{pad}  }}");
    }
    let _ = writeln!(out, "{pad}}}");
}

fn hierarchy(root: &Node) -> (String, Vec<&'static str>) {
    let mut out = String::from("HIERARCHY\n");
    let mut names = Vec::new();
    write_node(&mut out, root, 0, true, &mut names);
    (out, names)
}

/// Shape of a synthetic walk.
#[derive(Debug, Clone, Copy)]
pub struct WalkParams {
    /// Half-extent of the figure eight along X and Z, meters.
    pub radius_x: f64,
    pub radius_z: f64,
    /// Seconds per lap of the figure eight.
    pub lap_s: f64,
    /// Gait cycles per second.
    pub cadence_hz: f64,
    pub phase: f64,
    pub frames: usize,
    pub rate_hz: f64,
}

pub const WALK_A: WalkParams =
    WalkParams { radius_x: 0.8, radius_z: 0.6, lap_s: 8.0, cadence_hz: 1.0, phase: 0.0, frames: 800, rate_hz: 100.0 };
pub const WALK_B: WalkParams =
    WalkParams { radius_x: 0.6, radius_z: 0.75, lap_s: 10.0, cadence_hz: 0.9, phase: 1.3, frames: 1000, rate_hz: 100.0 };

/// Local rotation of one joint as (z, x, y) degrees.
fn joint_angles(name: &str, gait: f64) -> [f64; 3] {
    let s = gait.sin();
    let knee = |g: f64| 30.0 * (1.0 - g.cos()) / 2.0;
    match name {
        "Spine" => [0.0, 2.0, 5.0 * s],
        "Spine2" => [0.0, 1.0, -3.0 * s],
        "Neck" | "Head" => [0.0, 3.0 * (2.0 * gait).sin(), 0.0],
        "LeftUpLeg" => [0.0, 25.0 * s, 0.0],
        "RightUpLeg" => [0.0, -25.0 * s, 0.0],
        "LeftLeg" => [0.0, knee(gait), 0.0],
        "RightLeg" => [0.0, knee(gait + std::f64::consts::PI), 0.0],
        "LeftFoot" => [0.0, 10.0 * (gait + 1.0).sin(), 0.0],
        "RightFoot" => [0.0, -10.0 * (gait + 1.0).sin(), 0.0],
        "LeftArm" => [-70.0, -20.0 * s, 0.0],
        "RightArm" => [70.0, 20.0 * s, 0.0],
        "LeftForeArm" | "RightForeArm" => [0.0, 0.0, -15.0 - 10.0 * s],
        n if n.contains("Hand") && n.ends_with(|c: char| c.is_ascii_digit()) => [0.0, 10.0 + 5.0 * (gait + 0.5).sin(), 0.0],
        _ => [0.0, 0.0, 0.0],
    }
}

/// A 50-joint performer walking a figure eight around the stream origin.
pub fn walk_bvh(p: &WalkParams) -> String {
    let (mut out, names) = hierarchy(&performer());
    let _ = writeln!(out, "MOTION\nFrames: {}\nFrame Time: {:.6}", p.frames, 1.0 / p.rate_hz);
    for i in 0..p.frames {
        let t = i as f64 / p.rate_hz;
        let lap = TAU * t / p.lap_s + p.phase;
        let gait = TAU * p.cadence_hz * t + p.phase;
        let x = p.radius_x * lap.sin();
        let z = p.radius_z * (2.0 * lap).sin();
        let dx = p.radius_x * lap.cos();
        let dz = 2.0 * p.radius_z * (2.0 * lap).cos();
        let yaw = dx.atan2(dz).to_degrees();
        let y = 0.95 + 0.02 * (2.0 * gait).cos();
        let mut line = format!("{x:.4} {y:.4} {z:.4} 0.0000 {:.4} {yaw:.4}", 3.0 * (2.0 * gait).sin());
        for name in &names[1..] {
            let [az, ax, ay] = joint_angles(name, gait);
            let _ = write!(line, " {az:.4} {ax:.4} {ay:.4}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Hierarchy-only rig for the puppet avatar.
pub fn puppet_bvh() -> String {
    let (mut out, _) = hierarchy(&puppet());
    out.push_str("MOTION\nFrames: 0\nFrame Time: 0.010000\n");
    out
}

pub fn puppet_bone_map() -> String {
    let map: serde_json::Map<String, serde_json::Value> =
        PUPPET_MAP.iter().map(|(s, t)| (s.to_string(), serde_json::Value::from(*t))).collect();
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "map": map })).expect("static map");
    text.push('\n');
    text
}

/// `(file name, contents)` of every generated asset.
pub fn generated_assets() -> Vec<(&'static str, String)> {
    vec![
        ("walk_a.bvh", walk_bvh(&WALK_A)),
        ("walk_b.bvh", walk_bvh(&WALK_B)),
        ("puppet.bvh", puppet_bvh()),
        ("puppet_map.json", puppet_bone_map()),
    ]
}
