//! The scenario assertions notice broken logs, not just pass good ones.

use stagelink::scenario::{fanout_violations, head_watch_errors, run_scenario, ScenarioOptions};
use stagelink_core::bus::{read_session, SessionLog};
use stagelink_core::UnitQuat;

fn recorded(name: &str, ticks: u64) -> SessionLog {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.log");
    let opts = ScenarioOptions { ticks: Some(ticks), record: Some(path.clone()), ..Default::default() };
    let report = run_scenario(name, &opts).unwrap();
    assert_eq!(report.ticks, ticks);
    read_session(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn head_watch_detects_a_turned_head() {
    let mut log = recorded("watching", 520);
    let clean = head_watch_errors(&log);
    assert!(clean.max_error < 1e-9);
    assert_eq!(clean.switches.iter().filter(|s| s.0 == 500).count(), 1);

    let head = log.header.config.avatars[0].topology.head_index().unwrap();
    let pose = &mut log.ticks[500].output.poses[0].pose;
    pose.joint_rotations[head] = UnitQuat::from_yaw(1e-5) * pose.joint_rotations[head];
    let broken = head_watch_errors(&log);
    assert!(broken.max_error > 5e-6, "{}", broken.max_error);
    assert_eq!(broken.worst, Some((500, "A1".to_string())));
}

#[test]
fn fanout_detects_diverging_limbs_and_roots() {
    let log = recorded("crowd", 40);
    let clean = fanout_violations(&log);
    assert_eq!(clean.violations, 0);
    assert_eq!(clean.pairs, 40 * 4);

    let mut limbs = log.clone();
    let q = &mut limbs.ticks[7].output.poses[1].pose.joint_rotations[10];
    *q = UnitQuat::from_pitch(1e-3) * *q;
    assert_eq!(fanout_violations(&limbs).violations, 1);

    let mut root = log;
    root.ticks[9].output.poses[4].pose.position.x += 1e-8;
    assert_eq!(fanout_violations(&root).violations, 1);
}

#[test]
fn scenario_length_follows_tick_rate() {
    let opts = ScenarioOptions { tick_hz: Some(50), ..Default::default() };
    let r = run_scenario("walking", &opts).unwrap();
    assert_eq!(r.ticks, 500);
}
