//! Session logs: every tick's inputs and output, for bit-exact replay.
//!
//! Layout: the 8-byte magic, a u32 length and the bincode header, then
//! records of `u32 length | u8 tag | bincode payload`. Tag 1 holds a tick's
//! inputs, tag 2 its output, tag 3 closes the log with the tick count.
//! All integers are little-endian.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cue::CueSheet;
use crate::mixer::{EngineConfig, Mixer, MixerError, TickInputs, TickOutput};

pub const MAGIC: &[u8; 8] = b"SLOG\0\0\0\x01";

const TAG_INPUTS: u8 = 1;
const TAG_OUTPUT: u8 = 2;
const TAG_TRAILER: u8 = 3;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("corrupt session log: {0}")]
    CorruptLog(String),
    #[error("session was recorded with a different scene or cue sheet")]
    SceneMismatch,
    #[error("cannot rebuild the recorded engine: {0}")]
    Mixer(#[from] MixerError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub scene_hash: [u8; 32],
    pub cue_hash: [u8; 32],
    pub tick_hz: u32,
    pub config: EngineConfig,
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn to_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    bincode::serialize(v).expect("engine types always serialize")
}

/// `(scene hash, cue sheet hash)` of a configuration.
pub fn config_hashes(config: &EngineConfig) -> ([u8; 32], [u8; 32]) {
    let scene = EngineConfig { cue_sheet: CueSheet::default(), ..config.clone() };
    (sha256(&to_bytes(&scene)), sha256(&to_bytes(&config.cue_sheet)))
}

pub struct SessionWriter<W: Write> {
    out: W,
    ticks: u64,
    last_tick: Option<u64>,
}

impl<W: Write> SessionWriter<W> {
    pub fn new(mut out: W, config: &EngineConfig) -> io::Result<Self> {
        let (scene_hash, cue_hash) = config_hashes(config);
        let header = to_bytes(&SessionHeader { scene_hash, cue_hash, tick_hz: config.tick_hz, config: config.clone() });
        out.write_all(MAGIC)?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        Ok(Self { out, ticks: 0, last_tick: None })
    }

    fn write_record(&mut self, tag: u8, payload: &[u8]) -> io::Result<()> {
        self.out.write_all(&((payload.len() + 1) as u32).to_le_bytes())?;
        self.out.write_all(&[tag])?;
        self.out.write_all(payload)
    }

    pub fn record(&mut self, inputs: &TickInputs, output: &TickOutput) -> io::Result<()> {
        if self.last_tick.is_some_and(|t| output.tick_no <= t) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "ticks must be recorded in increasing order"));
        }
        self.write_record(TAG_INPUTS, &to_bytes(inputs))?;
        self.write_record(TAG_OUTPUT, &to_bytes(output))?;
        self.last_tick = Some(output.tick_no);
        self.ticks += 1;
        Ok(())
    }

    /// Writes the trailer and returns the sink.
    pub fn finish(mut self) -> io::Result<W> {
        let ticks = self.ticks.to_le_bytes();
        self.write_record(TAG_TRAILER, &ticks)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone)]
pub struct RecordedTick {
    pub inputs: TickInputs,
    pub output: TickOutput,
    /// The output record exactly as stored.
    pub output_bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct SessionLog {
    pub header: SessionHeader,
    pub ticks: Vec<RecordedTick>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], SessionError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            SessionError::CorruptLog(format!("truncated {what} at byte {}", self.at))
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize, SessionError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")) as usize)
    }

    fn record(&mut self) -> Result<(u8, &'a [u8]), SessionError> {
        let len = self.u32("record length")?;
        if len == 0 {
            return Err(SessionError::CorruptLog(format!("empty record at byte {}", self.at)));
        }
        let body = self.take(len, "record")?;
        Ok((body[0], &body[1..]))
    }
}

fn decode<'a, T: Deserialize<'a>>(bytes: &'a [u8], what: &str) -> Result<T, SessionError> {
    bincode::deserialize(bytes).map_err(|e| SessionError::CorruptLog(format!("bad {what}: {e}")))
}

pub fn read_session(bytes: &[u8]) -> Result<SessionLog, SessionError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(SessionError::CorruptLog("not a session log".into()));
    }
    let hlen = r.u32("header length")?;
    let header: SessionHeader = decode(r.take(hlen, "header")?, "header")?;
    if config_hashes(&header.config) != (header.scene_hash, header.cue_hash) {
        return Err(SessionError::CorruptLog("header hashes do not match the embedded configuration".into()));
    }
    let mut ticks: Vec<RecordedTick> = Vec::new();
    loop {
        let (tag, payload) = r.record()?;
        match tag {
            TAG_INPUTS => {
                let inputs = decode(payload, "inputs record")?;
                let (tag, payload) = r.record()?;
                if tag != TAG_OUTPUT {
                    return Err(SessionError::CorruptLog(format!("expected an output record, found tag {tag}")));
                }
                let output: TickOutput = decode(payload, "output record")?;
                if ticks.last().is_some_and(|t| output.tick_no <= t.output.tick_no) {
                    return Err(SessionError::CorruptLog(format!("tick {} out of order", output.tick_no)));
                }
                ticks.push(RecordedTick { inputs, output, output_bytes: payload.to_vec() });
            }
            TAG_TRAILER => {
                let n: u64 = decode(payload, "trailer")?;
                if n != ticks.len() as u64 {
                    return Err(SessionError::CorruptLog(format!("trailer says {n} ticks, found {}", ticks.len())));
                }
                if r.at != bytes.len() {
                    return Err(SessionError::CorruptLog("data after trailer".into()));
                }
                return Ok(SessionLog { header, ticks });
            }
            other => return Err(SessionError::CorruptLog(format!("unknown record tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Identical { ticks: u64 },
    Diverged { tick_no: u64 },
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Identical { .. } => f.write_str("identical"),
            Verdict::Diverged { tick_no } => write!(f, "diverged at tick {tick_no}"),
        }
    }
}

/// Refuses logs recorded against a different configuration.
pub fn check_config(log: &SessionLog, expected: &EngineConfig) -> Result<(), SessionError> {
    if config_hashes(expected) != (log.header.scene_hash, log.header.cue_hash) {
        return Err(SessionError::SceneMismatch);
    }
    Ok(())
}

/// Re-runs the recorded inputs through a fresh mixer and compares every
/// output byte for byte.
pub fn replay(log: &SessionLog) -> Result<Verdict, SessionError> {
    let mut mixer = Mixer::new(log.header.config.clone())?;
    for t in &log.ticks {
        let out = mixer.tick(&t.inputs);
        if to_bytes(&out) != t.output_bytes {
            return Ok(Verdict::Diverged { tick_no: t.output.tick_no });
        }
    }
    Ok(Verdict::Identical { ticks: log.ticks.len() as u64 })
}
