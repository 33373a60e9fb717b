//! Streams a BVH clip as MSTREAM/1 datagrams, paced by the wall clock.

use std::net::{SocketAddr, UdpSocket};
use std::path::Path;
use std::time::{Duration, Instant};

use stagelink_core::mocap::{encode_frame, load_bvh, BvhError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlayError {
    #[error(transparent)]
    Parse(#[from] BvhError),
    #[error("socket: {0}")]
    Socket(#[from] std::io::Error),
    #[error("rate must be positive, got {0}")]
    BadRate(f64),
}

#[derive(Debug, Clone)]
pub struct PlayOptions {
    pub to: SocketAddr,
    pub stream_id: u8,
    /// Frames per second; the file's own frame time when `None`.
    pub rate_hz: Option<f64>,
    pub looping: bool,
    /// Stop after this many datagrams (needed to end a looping run).
    pub limit: Option<u64>,
}

/// Sleeps to just short of `due`, then yields until it; plain sleeps overshoot by
/// a scheduler quantum.
fn wait_until(due: Instant) {
    const SPIN: Duration = Duration::from_micros(300);
    let now = Instant::now();
    if due > now + SPIN {
        std::thread::sleep(due - now - SPIN);
    }
    while Instant::now() < due {
        std::thread::yield_now();
    }
}

/// Sends every frame of `path` (forever, or up to `limit`, when looping)
/// and returns the number of datagrams sent.
///
/// Frame `i` leaves at `start + i * period`; a late frame is sent at once
/// and the schedule is not shifted. Frame numbers keep counting across
/// loop wraps.
pub fn play_bvh(path: impl AsRef<Path>, opts: &PlayOptions) -> Result<u64, PlayError> {
    let clip = load_bvh(path, opts.stream_id)?;
    let period = match opts.rate_hz {
        Some(r) if !(r > 0.0 && r.is_finite()) => return Err(PlayError::BadRate(r)),
        Some(r) => Duration::from_secs_f64(1.0 / r),
        None => Duration::from_micros(clip.frame_time_us().max(1)),
    };
    let n = clip.frames.len() as u64;
    let total = match (opts.looping, opts.limit) {
        (_, _) if n == 0 => 0,
        (true, limit) => limit.unwrap_or(u64::MAX),
        (false, Some(limit)) => limit.min(n),
        (false, None) => n,
    };

    let bind: SocketAddr = if opts.to.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("literal address");
    let sock = UdpSocket::bind(bind)?;
    sock.connect(opts.to)?;

    let start = Instant::now();
    for i in 0..total {
        wait_until(start + period.mul_f64(i as f64));
        let mut frame = clip.frames[(i % n) as usize].clone();
        frame.frame_no = i.min(u32::MAX as u64) as u32;
        frame.timestamp_us = (period.as_secs_f64() * i as f64 * 1e6).round() as u64;
        sock.send(&encode_frame(&frame))?;
    }
    Ok(total)
}
