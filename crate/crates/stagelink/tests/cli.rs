//! The `stagelink` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use stagelink::scenario::default_assets_dir;

fn stagelink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stagelink")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn record_walking(dir: &Path, ticks: &str) -> std::path::PathBuf {
    let log = dir.join("w.log");
    let o = stagelink(&["scenario", "walking", "--ticks", ticks, "--record", log.to_str().unwrap()]);
    assert!(log.exists(), "{}", String::from_utf8_lossy(&o.stderr));
    log
}

#[test]
fn negative_control_exits_nonzero() {
    let o = stagelink(&["scenario", "walking", "--no-manipulator"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL space_expansion"));
    let o = stagelink(&["scenario", "crowd", "--ticks", "50", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["avatars"], 6);
    assert_eq!(v["ticks"], 50);
}

/// Offset of the first pose's translation.x inside the output record of
/// `tick` (every tick here carries the same two avatar names).
fn first_pose_x_offset(bytes: &[u8], tick: usize) -> usize {
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let mut at = 8;
    at += 4 + u32_at(at);
    let mut outputs = 0;
    loop {
        let len = u32_at(at);
        if bytes[at + 4] == 2 {
            if outputs == tick {
                let payload = at + 5;
                let name_len = u32_at(payload + 16);
                return payload + 8 + 8 + 8 + name_len + 2;
            }
            outputs += 1;
        }
        at += 4 + len;
    }
}

#[test]
fn replay_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let log = record_walking(dir.path(), "120");
    let o = stagelink(&["replay", log.to_str().unwrap(), "--verify"]);
    assert_eq!(stdout(&o).trim(), "identical");
    assert!(o.status.success());
    let o = stagelink(&["replay", log.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("120 ticks at 100 Hz, 2 avatars, 1 cues"));

    let mut bytes = std::fs::read(&log).unwrap();
    let at = first_pose_x_offset(&bytes, 77);
    bytes[at] ^= 1;
    let flipped = dir.path().join("flipped.log");
    std::fs::write(&flipped, &bytes).unwrap();
    let o = stagelink(&["replay", flipped.to_str().unwrap(), "--verify"]);
    assert_eq!(stdout(&o).trim(), "diverged at tick 77");
    assert_eq!(o.status.code(), Some(1));

    let cut = dir.path().join("cut.log");
    let full = std::fs::read(&log).unwrap();
    std::fs::write(&cut, &full[..full.len() - 3]).unwrap();
    let o = stagelink(&["replay", cut.to_str().unwrap(), "--verify"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("corrupt session log"));
}

#[test]
fn replay_refuses_other_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let log = record_walking(dir.path(), "5");
    let assets = default_assets_dir();
    let scene = |n: &str| assets.join(n).display().to_string();
    let same = stagelink(&[
        "replay",
        log.to_str().unwrap(),
        "--scene",
        &scene("walking.scene.json"),
        "--cues",
        &scene("walking.cues.json"),
    ]);
    assert!(same.status.success(), "{}", String::from_utf8_lossy(&same.stderr));
    let other = stagelink(&["replay", log.to_str().unwrap(), "--scene", &scene("crowd.scene.json")]);
    assert_eq!(other.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&other.stderr).contains("different scene"));
}

#[test]
fn tick_rate_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_stagelink"))
        .args(["scenario", "watching", "--ticks", "10", "--json"])
        .env("STAGELINK_TICK_HZ", "50")
        .output()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("hz.log");
    let r = Command::new(env!("CARGO_BIN_EXE_stagelink"))
        .args(["scenario", "watching", "--ticks", "10", "--record", log.to_str().unwrap()])
        .env("STAGELINK_TICK_HZ", "50")
        .output()
        .unwrap();
    assert!(o.status.success() || o.status.code() == Some(1));
    assert!(r.status.code().is_some());
    let info = stagelink(&["replay", log.to_str().unwrap()]);
    assert!(stdout(&info).starts_with("10 ticks at 50 Hz"), "{}", stdout(&info));
}

#[test]
fn play_reports_count_and_parse_errors() {
    let sink = std::net::UdpSocket::bind("127.0.0.1:0").unwrap();
    let to = sink.local_addr().unwrap().to_string();
    let bvh = default_assets_dir().join("walk_a.bvh");
    let o = stagelink(&["play", "--bvh", bvh.to_str().unwrap(), "--to", &to, "--rate", "2000", "--count", "25"]);
    assert_eq!(stdout(&o).trim(), "25 frames sent");
    let o = stagelink(&["play", "--bvh", "/nonexistent.bvh", "--to", &to]);
    assert_eq!(o.status.code(), Some(2));
}
