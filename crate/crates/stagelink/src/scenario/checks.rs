//! Scenario assertions. Each one reads only the session log.

use std::collections::BTreeMap;

use stagelink_core::bus::SessionLog;
use stagelink_core::manipulator::Channel;
use stagelink_core::mixer::EventKind;
use stagelink_core::pose::{forward_kinematics, wrap_angle};
use stagelink_core::stage::MIN_GAZE_DISTANCE;
use stagelink_core::{map_a_to_b, CueAction, Owner, ReferenceTransform, StreamSample, UnitQuat, Vec3, WatchTarget};

use super::Assertion;

const WATCH_TOLERANCE: f64 = 1e-6;
const FANOUT_TOLERANCE: f64 = 1e-9;
const EXPANSION_M: f64 = 6.0;
const BOX_M: f64 = 2.0;

fn actions(kind: &EventKind) -> Option<&CueAction> {
    match kind {
        EventKind::CueAction { action, .. } | EventKind::Action { action } => Some(action),
        _ => None,
    }
}

fn root_track(log: &SessionLog, avatar: &str) -> Vec<Vec3> {
    log.ticks
        .iter()
        .filter_map(|t| t.output.poses.iter().find(|p| p.avatar == avatar).map(|p| p.pose.position))
        .collect()
}

fn poses_per_tick(log: &SessionLog, expected: usize) -> Assertion {
    let bound = log.header.config.avatars.len();
    let bad = log.ticks.iter().filter(|t| t.output.poses.len() != expected).count();
    Assertion::new(
        "poses_per_tick",
        bad == 0 && bound == expected && !log.ticks.is_empty(),
        format!("{expected} poses expected on each of {} ticks, {bad} ticks differ", log.ticks.len()),
    )
}

fn input_confined(log: &SessionLog) -> Assertion {
    let calib = &log.header.config.calibration;
    let mut spans: BTreeMap<u8, (Vec3, Vec3)> = BTreeMap::new();
    let mut outside = 0usize;
    for t in &log.ticks {
        for (&id, s) in &t.inputs.frames {
            let StreamSample::Frame(f) = s else { continue };
            let p = f.root_position;
            if !calib.volume(id).is_some_and(|v| v.contains(p)) {
                outside += 1;
            }
            let e = spans.entry(id).or_insert((p, p));
            e.0 = Vec3::new(e.0.x.min(p.x), e.0.y.min(p.y), e.0.z.min(p.z));
            e.1 = Vec3::new(e.1.x.max(p.x), e.1.y.max(p.y), e.1.z.max(p.z));
        }
    }
    let boxed = log.header.config.streams.keys().all(|id| {
        calib.volume(*id).is_some_and(|v| {
            let d = v.max() - v.min();
            d.x <= BOX_M && d.z <= BOX_M
        })
    });
    let widest = spans.values().map(|(lo, hi)| (hi.x - lo.x).max(hi.z - lo.z)).fold(0.0, f64::max);
    Assertion::new(
        "input_confined",
        boxed && outside == 0 && !spans.is_empty() && widest <= BOX_M,
        format!("widest input root span {widest:.3} m, {outside} samples outside their acting volume"),
    )
}

fn expansion(log: &SessionLog) -> Assertion {
    let mut parts = Vec::new();
    let mut ok = !log.header.config.avatars.is_empty();
    for a in &log.header.config.avatars {
        let track = root_track(log, &a.avatar_id);
        let d = track.first().map_or(0.0, |&p0| track.iter().map(|p| p.horizontal_distance(p0)).fold(0.0, f64::max));
        ok &= d > EXPANSION_M;
        parts.push(format!("{} {d:.2} m", a.avatar_id));
    }
    Assertion::new("space_expansion", ok, format!("largest displacement: {} (need > {EXPANSION_M} m)", parts.join(", ")))
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_meet(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// First pair of segment indices where the ground-plane polylines `a` and
/// `b` touch.
pub fn paths_cross(a: &[Vec3], b: &[Vec3]) -> Option<(usize, usize)> {
    let xz = |v: &Vec3| (v.x, v.z);
    for i in 0..a.len().saturating_sub(1) {
        let (p1, p2) = (xz(&a[i]), xz(&a[i + 1]));
        for j in 0..b.len().saturating_sub(1) {
            let (q1, q2) = (xz(&b[j]), xz(&b[j + 1]));
            if p1.0.max(p2.0) < q1.0.min(q2.0)
                || q1.0.max(q2.0) < p1.0.min(p2.0)
                || p1.1.max(p2.1) < q1.1.min(q2.1)
                || q1.1.max(q2.1) < p1.1.min(p2.1)
            {
                continue;
            }
            if segments_meet(p1, p2, q1, q2) {
                return Some((i, j));
            }
        }
    }
    None
}

fn interlacing(log: &SessionLog) -> Assertion {
    let avatars = &log.header.config.avatars;
    if avatars.len() < 2 {
        return Assertion::new("trajectory_interlacing", false, "needs two avatars");
    }
    let (a, b) = (&avatars[0].avatar_id, &avatars[1].avatar_id);
    match paths_cross(&root_track(log, a), &root_track(log, b)) {
        Some((i, j)) => {
            Assertion::new("trajectory_interlacing", true, format!("{a} (tick {i}) crosses the path of {b} (tick {j})"))
        }
        None => Assertion::new("trajectory_interlacing", false, format!("paths of {a} and {b} never cross")),
    }
}

/// Ground-plane heading of the rotated +Z axis; the expression is
/// homogeneous in `q`, so it holds for slightly non-unit quaternions.
fn heading(q: UnitQuat) -> Option<f64> {
    let (w, x, y, z) = (q.w(), q.x(), q.y(), q.z());
    let fx = 2.0 * (x * z + w * y);
    let fz = w * w - x * x - y * y + z * z;
    (fx.hypot(fz) > 1e-12).then(|| fx.atan2(fz))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WatchErrors {
    /// Head poses compared against their target.
    pub checked: u64,
    /// Watch-driven heads whose target sat on the head's vertical axis.
    pub skipped: u64,
    pub max_error: f64,
    pub worst: Option<(u64, String)>,
    /// `(tick, avatar, error)` for every tick that switched a watched target.
    pub switches: Vec<(u64, String, f64)>,
    pub performer_checks: u64,
}

/// Head yaw error of every watch-driven head, for every tick of the log.
///
/// Watch targets and head ownership are rebuilt from the configuration and
/// the logged events; only heads owned outright by the procedural layer
/// are expected to face their target exactly.
pub fn head_watch_errors(log: &SessionLog) -> WatchErrors {
    let cfg = &log.header.config;
    let mut watch: BTreeMap<&str, Option<WatchTarget>> =
        cfg.avatars.iter().map(|a| (a.avatar_id.as_str(), a.watch.clone())).collect();
    let mut head_owner: BTreeMap<&str, Owner> = BTreeMap::new();
    let mut out = WatchErrors::default();

    for t in &log.ticks {
        let tick = t.output.tick_no;
        let mut switched: Vec<&str> = Vec::new();
        for e in &t.output.events {
            match actions(&e.kind) {
                Some(CueAction::SetWatch { avatar, target }) => {
                    if let Some(w) = watch.get_mut(avatar.as_str()) {
                        *w = target.clone();
                        switched.push(avatar);
                    }
                }
                Some(CueAction::SetOwnership { avatar, channel: Channel::Head, owner }) => {
                    if let Some(a) = cfg.avatars.iter().find(|a| &a.avatar_id == avatar) {
                        head_owner.insert(&a.avatar_id, *owner);
                    }
                }
                _ => {}
            }
        }

        for (i, binding) in cfg.avatars.iter().enumerate() {
            let id = binding.avatar_id.as_str();
            let Some(target) = watch.get(id).cloned().flatten() else { continue };
            if head_owner.get(id) != Some(&Owner::Procedural) {
                continue;
            }
            let Some(h) = binding.topology.head_index() else { continue };
            let Some(pose) = t.output.poses.iter().find(|p| usize::from(p.bus_id) == i) else { continue };
            let point = match &target {
                WatchTarget::Avatar { id } => match t.output.poses.iter().find(|p| &p.avatar == id) {
                    Some(p) => p.pose.position,
                    None => continue,
                },
                WatchTarget::Performer { pos } => map_a_to_b(*pos, &cfg.calibration),
                WatchTarget::Point { pos } => *pos,
            };
            let (head_pos, head_rot) = forward_kinematics(&binding.topology, &pose.pose)[h];
            let (dx, dz) = (point.x - head_pos.x, point.z - head_pos.z);
            if dx.hypot(dz) < MIN_GAZE_DISTANCE {
                out.skipped += 1;
                continue;
            }
            let err = heading(head_rot).map_or(f64::INFINITY, |y| wrap_angle(y - dx.atan2(dz)).abs());
            out.checked += 1;
            if matches!(target, WatchTarget::Performer { .. }) {
                out.performer_checks += 1;
            }
            if out.worst.is_none() || err > out.max_error {
                out.max_error = err;
                out.worst = Some((tick, id.to_string()));
            }
            if switched.contains(&id) {
                out.switches.push((tick, id.to_string(), err));
            }
        }
    }
    out
}

fn head_watch(log: &SessionLog) -> Assertion {
    let w = head_watch_errors(log);
    let worst = w.worst.as_ref().map_or(String::new(), |(t, a)| format!(" ({a} at tick {t})"));
    Assertion::new(
        "head_watch",
        w.checked > 0 && w.max_error < WATCH_TOLERANCE,
        format!(
            "max head yaw error {:.3e} rad{worst} over {} head poses, {} skipped",
            w.max_error, w.checked, w.skipped
        ),
    )
}

fn watch_switch(log: &SessionLog) -> Assertion {
    let w = head_watch_errors(log);
    let later: Vec<_> = w.switches.iter().filter(|(t, ..)| *t > 0).collect();
    let worst = later.iter().map(|s| s.2).fold(0.0, f64::max);
    let ticks: Vec<String> = later.iter().map(|(t, a, _)| format!("{a}@{t}")).collect();
    Assertion::new(
        "watch_switch",
        !later.is_empty() && w.performer_checks > 0 && worst < WATCH_TOLERANCE,
        format!(
            "{} target switches [{}], worst error on the switching tick {worst:.3e} rad, {} performer-target poses",
            later.len(),
            ticks.join(", "),
            w.performer_checks
        ),
    )
}

fn ref_matrix(r: &ReferenceTransform) -> [[f64; 3]; 3] {
    let (sy, cy) = r.yaw().sin_cos();
    let (sp, cp) = r.pitch().sin_cos();
    // Ry(yaw) * Rx(pitch)
    [[cy, sy * sp, sy * cp], [0.0, cp, -sp], [-sy, cy * sp, cy * cp]]
}

fn local_root(r: &ReferenceTransform, world: Vec3) -> Vec3 {
    let m = ref_matrix(r);
    let d = world - r.translation();
    Vec3::new(
        m[0][0] * d.x + m[1][0] * d.y + m[2][0] * d.z,
        m[0][1] * d.x + m[1][1] * d.y + m[2][1] * d.z,
        m[0][2] * d.x + m[1][2] * d.y + m[2][2] * d.z,
    )
}

fn quat_gap(a: UnitQuat, b: UnitQuat) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    let same = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
    let flipped = (0..4).map(|i| (a[i] + b[i]).abs()).fold(0.0, f64::max);
    same.min(flipped)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FanoutCheck {
    pub pairs: u64,
    pub violations: u64,
    pub max_root_error: f64,
    pub identical_refs: u64,
}

/// Compares every avatar with the first avatar on its stream: the joint
/// rotation lists must be identical and the roots, taken back through
/// each avatar's reference transform, must coincide.
pub fn fanout_violations(log: &SessionLog) -> FanoutCheck {
    let avatars = &log.header.config.avatars;
    let mut out = FanoutCheck::default();
    for t in &log.ticks {
        let mut first: BTreeMap<u8, usize> = BTreeMap::new();
        for (k, p) in t.output.poses.iter().enumerate() {
            let Some(binding) = avatars.get(usize::from(p.bus_id)) else {
                out.violations += 1;
                continue;
            };
            let Some(&base_k) = first.get(&binding.stream_id) else {
                first.insert(binding.stream_id, k);
                continue;
            };
            let base = &t.output.poses[base_k];
            out.pairs += 1;
            if base.reference == p.reference {
                out.identical_refs += 1;
            }
            let pos_err = (local_root(&base.reference, base.pose.position) - local_root(&p.reference, p.pose.position))
                .length();
            let q = |r: &ReferenceTransform, w: UnitQuat| {
                UnitQuat::from_yaw_pitch_roll(r.yaw(), r.pitch(), 0.0).inverse() * w
            };
            let rot_err = quat_gap(q(&base.reference, base.pose.rotation), q(&p.reference, p.pose.rotation));
            out.max_root_error = out.max_root_error.max(pos_err).max(rot_err);
            if base.pose.joint_rotations != p.pose.joint_rotations || pos_err > FANOUT_TOLERANCE || rot_err > FANOUT_TOLERANCE
            {
                out.violations += 1;
            }
        }
    }
    out
}

fn fanout(log: &SessionLog) -> Assertion {
    let f = fanout_violations(log);
    Assertion::new(
        "fanout_independence",
        f.pairs > 0 && f.violations == 0 && f.identical_refs == 0,
        format!(
            "{} avatar pairs compared, {} violations, {} with equal references, max root mismatch {:.3e}",
            f.pairs, f.violations, f.identical_refs, f.max_root_error
        ),
    )
}

pub(super) fn walking(log: &SessionLog) -> Vec<Assertion> {
    vec![poses_per_tick(log, 2), input_confined(log), expansion(log), interlacing(log), head_watch(log)]
}

pub(super) fn watching(log: &SessionLog) -> Vec<Assertion> {
    vec![poses_per_tick(log, 2), head_watch(log), watch_switch(log)]
}

pub(super) fn crowd(log: &SessionLog) -> Vec<Assertion> {
    vec![poses_per_tick(log, 6), fanout(log)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, f64)]) -> Vec<Vec3> {
        points.iter().map(|&(x, z)| Vec3::new(x, 0.0, z)).collect()
    }

    #[test]
    fn crossing_polylines() {
        let a = line(&[(-2.0, 0.0), (2.0, 0.0)]);
        assert_eq!(paths_cross(&a, &line(&[(0.0, -1.0), (0.0, 1.0)])), Some((0, 0)));
        assert_eq!(paths_cross(&a, &line(&[(0.0, 0.5), (1.0, 1.0)])), None);
        assert!(paths_cross(&a, &line(&[(5.0, 1.0), (1.0, 1.0), (1.0, 0.0)])).is_some());
        assert_eq!(paths_cross(&a, &line(&[(3.0, 0.0), (4.0, 0.0)])), None);
        assert_eq!(paths_cross(&a, &[]), None);
    }

    #[test]
    fn heading_matches_yaw() {
        for deg in [-170.0_f64, -90.0, 0.0, 45.0, 179.0] {
            let q = UnitQuat::from_yaw_pitch_roll(deg.to_radians(), 0.3, -0.2);
            assert!((heading(q).unwrap() - deg.to_radians()).abs() < 1e-12);
        }
        assert!(heading(UnitQuat::from_pitch(-std::f64::consts::FRAC_PI_2)).is_none());
    }

    #[test]
    fn local_root_undoes_reference() {
        let r = ReferenceTransform::from_degrees(Vec3::new(3.0, 0.5, -2.0), 120.0, -15.0);
        let local = Vec3::new(0.3, 0.9, -0.4);
        let world = r.translation() + r.rotation().rotate(local);
        assert!((local_root(&r, world) - local).length() < 1e-12);
    }
}
