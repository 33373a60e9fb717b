//! The BVH player: datagram count, pacing and error cases.

use std::net::{SocketAddr, UdpSocket};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use stagelink::fixtures::{walk_bvh, WalkParams, WALK_A};
use stagelink::{play_bvh, PlayError, PlayOptions};
use stagelink_core::mocap::decode_frame;

/// The tests here pace real time; running them one at a time keeps them
/// from stealing each other's CPU on small machines.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn receiver() -> (UdpSocket, SocketAddr) {
    let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
    sock.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
    let addr = sock.local_addr().unwrap();
    (sock, addr)
}

fn clip(frames: usize) -> tempfile::NamedTempFile {
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), walk_bvh(&WalkParams { frames, ..WALK_A })).unwrap();
    f
}

fn opts(to: SocketAddr) -> PlayOptions {
    PlayOptions { to, stream_id: 3, rate_hz: None, looping: false, limit: None }
}

#[test]
fn hundred_frames_hundred_datagrams_ten_ms_apart() {
    let _serial = serial();
    let file = clip(100);
    let (sock, addr) = receiver();
    let rx = std::thread::spawn(move || {
        let mut buf = [0u8; 2048];
        let mut arrivals = Vec::new();
        while let Ok(n) = sock.recv(&mut buf) {
            arrivals.push((Instant::now(), decode_frame(&buf[..n]).unwrap()));
        }
        arrivals
    });
    let sent = play_bvh(file.path(), &PlayOptions { rate_hz: Some(100.0), ..opts(addr) }).unwrap();
    let arrivals = rx.join().unwrap();
    assert_eq!(sent, 100);
    assert_eq!(arrivals.len(), 100);
    for (i, (_, f)) in arrivals.iter().enumerate() {
        assert_eq!((f.stream_id, f.frame_no, f.timestamp_us), (3, i as u32, i as u64 * 10_000));
    }
    let gaps: Vec<f64> = arrivals.windows(2).map(|w| (w[1].0 - w[0].0).as_secs_f64() * 1e3).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    // Offset of every arrival from its 10 ms slot, anchored at the median so
    // a late first datagram does not shift the whole schedule.
    let t0 = arrivals[0].0;
    let mut offsets: Vec<f64> =
        arrivals.iter().enumerate().map(|(i, (t, _))| (*t - t0).as_secs_f64() * 1e3 - 10.0 * i as f64).collect();
    let mut sorted = offsets.clone();
    sorted.sort_by(f64::total_cmp);
    let anchor = sorted[sorted.len() / 2];
    offsets.iter_mut().for_each(|o| *o -= anchor);
    let on_slot = offsets.iter().filter(|o| o.abs() <= 1.0).count();
    println!("spacing: mean {mean:.3} ms, {on_slot}/100 datagrams within 1 ms of their slot");
    assert!((mean - 10.0).abs() <= 0.1, "mean spacing {mean:.3} ms");
    // A preempted receiver occasionally wakes late for one datagram; the
    // schedule itself must not drift.
    assert!(on_slot >= 98, "{offsets:?}");
}

#[test]
fn looping_keeps_counting() {
    let _serial = serial();
    let file = clip(7);
    let (sock, addr) = receiver();
    let sent = play_bvh(file.path(), &PlayOptions { rate_hz: Some(1000.0), looping: true, limit: Some(20), ..opts(addr) })
        .unwrap();
    assert_eq!(sent, 20);
    let mut buf = [0u8; 2048];
    let mut last = None;
    for _ in 0..20 {
        let n = sock.recv(&mut buf).unwrap();
        last = Some(decode_frame(&buf[..n]).unwrap());
    }
    let last = last.unwrap();
    assert_eq!(last.frame_no, 19);
    assert_eq!(last.root_position, decode_frame(&stagelink_core::mocap::encode_frame(&{
        let mut f = stagelink_core::mocap::parse_bvh(&walk_bvh(&WalkParams { frames: 7, ..WALK_A }), 3).unwrap().frames[5].clone();
        f.frame_no = 19;
        f
    })).unwrap().root_position);
}

#[test]
fn default_rate_comes_from_the_file() {
    let _serial = serial();
    let file = clip(5);
    let (_sock, addr) = receiver();
    let started = Instant::now();
    assert_eq!(play_bvh(file.path(), &opts(addr)).unwrap(), 5);
    assert!(started.elapsed() >= Duration::from_millis(39));
}

#[test]
fn errors() {
    let _serial = serial();
    let (_sock, addr) = receiver();
    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), "HIERARCHY\nROOT Hips\n{\n OFFSET 0 0\n").unwrap();
    assert!(matches!(play_bvh(bad.path(), &opts(addr)), Err(PlayError::Parse(_))));
    assert!(matches!(play_bvh("/nonexistent.bvh", &opts(addr)), Err(PlayError::Parse(_))));
    let file = clip(2);
    assert!(matches!(play_bvh(file.path(), &PlayOptions { rate_hz: Some(0.0), ..opts(addr) }), Err(PlayError::BadRate(_))));
}
