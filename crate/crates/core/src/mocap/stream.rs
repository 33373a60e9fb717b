//! Per-stream clocks: which frame is current at a given engine time.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MocapFrame;
use crate::pose::SkeletonTopology;

pub const DEFAULT_MOCAP_PORT: u16 = 7000;

/// A live stream is stale once no frame has arrived for longer than this.
pub const STALE_AFTER_US: u64 = 500_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("stream stale: no frame for {silent_us} us")]
    StreamStale { silent_us: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrigin {
    Udp { port: u16 },
    /// `rate_hz` overrides the file's frame rate.
    Bvh { path: PathBuf, rate_hz: Option<f64>, looping: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSource {
    pub topology: SkeletonTopology,
    pub origin: StreamOrigin,
}

pub trait FrameSource {
    /// Latest frame at engine time `now_us`; `Ok(None)` before the first one.
    fn stream_tick(&mut self, now_us: u64) -> Result<Option<MocapFrame>, StreamError>;
}

/// Clocked playback of a loaded clip.
///
/// Frame `i` becomes current at `start_us + i * period_us`. Without looping
/// the last frame is held; with looping, `frame_no` keeps counting so it
/// stays monotone across wraps.
#[derive(Debug, Clone)]
pub struct BvhPlayback {
    frames: Vec<MocapFrame>,
    period_us: u64,
    start_us: u64,
    looping: bool,
}

impl BvhPlayback {
    pub fn new(frames: Vec<MocapFrame>, period_us: u64, start_us: u64, looping: bool) -> Self {
        Self { frames, period_us: period_us.max(1), start_us, looping }
    }

    pub fn period_us(&self) -> u64 {
        self.period_us
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_at(&self, now_us: u64) -> Option<MocapFrame> {
        if self.frames.is_empty() || now_us < self.start_us {
            return None;
        }
        let n = self.frames.len() as u64;
        let step = (now_us - self.start_us) / self.period_us;
        let (index, count) = if self.looping {
            (step % n, step)
        } else {
            let i = step.min(n - 1);
            (i, i)
        };
        let mut f = self.frames[index as usize].clone();
        f.frame_no = count.min(u32::MAX as u64) as u32;
        f.timestamp_us = self.start_us + count * self.period_us;
        Some(f)
    }
}

impl FrameSource for BvhPlayback {
    fn stream_tick(&mut self, now_us: u64) -> Result<Option<MocapFrame>, StreamError> {
        Ok(self.frame_at(now_us))
    }
}

/// Receive-side state of one UDP stream: keeps the freshest frame.
#[derive(Debug, Clone, Default)]
pub struct UdpFrameStore {
    latest: Option<MocapFrame>,
    last_rx_us: u64,
    accepted: u64,
    dropped: u64,
}

impl UdpFrameStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts `frame` if it is newer (by `frame_no`) than the one held.
    /// Returns whether it was kept.
    pub fn ingest(&mut self, frame: MocapFrame, rx_us: u64) -> bool {
        let newer = self.latest.as_ref().is_none_or(|l| frame.frame_no > l.frame_no);
        if newer {
            self.latest = Some(frame);
            self.last_rx_us = rx_us;
            self.accepted += 1;
        } else {
            self.dropped += 1;
        }
        newer
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

impl FrameSource for UdpFrameStore {
    fn stream_tick(&mut self, now_us: u64) -> Result<Option<MocapFrame>, StreamError> {
        let Some(f) = &self.latest else {
            return Ok(None);
        };
        let silent_us = now_us.saturating_sub(self.last_rx_us);
        if silent_us > STALE_AFTER_US {
            return Err(StreamError::StreamStale { silent_us });
        }
        Ok(Some(f.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{UnitQuat, Vec3};

    fn clip(n: usize) -> Vec<MocapFrame> {
        (0..n)
            .map(|i| MocapFrame::new(0, i as u32, i as u64 * 10_000, Vec3::new(i as f64, 0.0, 0.0), vec![UnitQuat::IDENTITY]))
            .collect()
    }

    #[test]
    fn playback_index_is_floor_of_elapsed() {
        let mut p = BvhPlayback::new(clip(10), 10_000, 0, false);
        assert_eq!(p.stream_tick(25_000).unwrap().unwrap().frame_no, 2);
        assert_eq!(p.stream_tick(10_000_000).unwrap().unwrap().frame_no, 9);
    }

    #[test]
    fn playback_before_start_is_none() {
        let mut p = BvhPlayback::new(clip(10), 10_000, 5_000, false);
        assert_eq!(p.stream_tick(4_999).unwrap(), None);
        assert!(p.stream_tick(5_000).unwrap().is_some());
    }

    #[test]
    fn looping_keeps_counting() {
        let p = BvhPlayback::new(clip(4), 10_000, 0, true);
        let f = p.frame_at(55_000).unwrap();
        assert_eq!(f.frame_no, 5);
        assert_eq!(f.root_position.x, 1.0);
    }

    #[test]
    fn udp_hold_last_then_stale() {
        let mut s = UdpFrameStore::new();
        assert_eq!(s.stream_tick(0).unwrap(), None);
        let f = clip(3);
        s.ingest(f[1].clone(), 1_000);
        assert!(!s.ingest(f[0].clone(), 2_000), "older frame must be dropped");
        assert_eq!(s.stream_tick(400_000).unwrap().unwrap().frame_no, 1);
        assert_eq!(s.stream_tick(501_000).unwrap().unwrap().frame_no, 1);
        assert_eq!(s.stream_tick(601_000), Err(StreamError::StreamStale { silent_us: 600_000 }));
        s.ingest(f[2].clone(), 700_000);
        assert_eq!(s.stream_tick(700_000).unwrap().unwrap().frame_no, 2);
        assert_eq!((s.accepted(), s.dropped()), (2, 1));
    }
}
