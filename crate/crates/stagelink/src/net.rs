//! Live engine: UDP mocap in, pose bus out, JSON control over TCP and
//! WebSocket.
//!
//! The tick loop owns the mixer. Receiver and session threads only feed
//! queues and shared frame stores; the loop drains them at the start of
//! each tick, so every control message lands on a tick boundary.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use anyhow::Context;
use stagelink_core::bus::control::{encode_server, STATE_PUSH_INTERVAL_US};
use stagelink_core::bus::{encode_pose_msg, parse_control, ControlRequest, PoseMessage, ServerMessage, SessionWriter};
use stagelink_core::mocap::{decode_frame, BvhPlayback, FrameSource, StreamError, StreamOrigin, UdpFrameStore};
use stagelink_core::mocap::{load_bvh, DEFAULT_MOCAP_PORT};
use stagelink_core::{load_cue_sheet, load_scene, Command, Mixer, StreamSample, TickInputs};

const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone)]
pub struct LiveOptions {
    pub scene: PathBuf,
    pub cues: Option<PathBuf>,
    /// Mocap UDP socket; the scene's first UDP port on all interfaces when
    /// `None`.
    pub listen: Option<SocketAddr>,
    /// Where pose bus datagrams are sent.
    pub posebus: SocketAddr,
    pub control: SocketAddr,
    pub ws: SocketAddr,
    pub tick_hz: Option<u32>,
    /// Stop after this many ticks; run until stopped otherwise.
    pub ticks: Option<u64>,
    pub record: Option<PathBuf>,
    /// Print every engine event to stdout as a JSON line.
    pub print_events: bool,
}

impl LiveOptions {
    pub fn new(scene: impl Into<PathBuf>) -> Self {
        Self {
            scene: scene.into(),
            cues: None,
            listen: None,
            posebus: SocketAddr::from(([127, 0, 0, 1], 7001)),
            control: SocketAddr::from(([0, 0, 0, 0], 7002)),
            ws: SocketAddr::from(([0, 0, 0, 0], 7003)),
            tick_hz: None,
            ticks: None,
            record: None,
            print_events: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LiveSummary {
    pub ticks: u64,
    pub poses_sent: u64,
    /// Pose messages the socket refused.
    pub poses_dropped: u64,
    pub frames_received: u64,
    pub frames_undecodable: u64,
    /// Ticks that started more than one period late.
    pub late_ticks: u64,
}

struct Session {
    out: Sender<String>,
    subscribed: bool,
}

#[derive(Default)]
struct Shared {
    stop: AtomicBool,
    next_session: AtomicU64,
    sessions: Mutex<BTreeMap<u64, Session>>,
    stores: Mutex<BTreeMap<u8, UdpFrameStore>>,
    frames_received: AtomicU64,
    frames_undecodable: AtomicU64,
}

impl Shared {
    fn stopped(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }

    fn open_session(&self) -> (u64, Receiver<String>) {
        let id = self.next_session.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        self.sessions.lock().expect("session table").insert(id, Session { out: tx, subscribed: false });
        (id, rx)
    }

    fn close_session(&self, id: u64) {
        self.sessions.lock().expect("session table").remove(&id);
    }

    fn reply(&self, id: u64, msg: &ServerMessage) {
        if let Some(s) = self.sessions.lock().expect("session table").get(&id) {
            let _ = s.out.send(encode_server(msg));
        }
    }
}

type Inbox = Sender<(u64, ControlRequest)>;

/// A running engine. Dropping it stops every thread.
pub struct LiveEngine {
    shared: Arc<Shared>,
    engine: Option<JoinHandle<anyhow::Result<LiveSummary>>>,
    workers: Vec<JoinHandle<()>>,
    pub mocap_addr: SocketAddr,
    pub control_addr: SocketAddr,
    pub ws_addr: SocketAddr,
}

impl LiveEngine {
    /// Loads the scene, binds every socket and starts ticking.
    pub fn start(opts: LiveOptions) -> anyhow::Result<Self> {
        let scene = load_scene(&opts.scene).with_context(|| format!("loading scene {}", opts.scene.display()))?;
        let mut config = scene.config;
        if let Some(path) = &opts.cues {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config.cue_sheet = load_cue_sheet(&text).with_context(|| format!("cue sheet {}", path.display()))?;
        }
        if let Some(hz) = opts.tick_hz {
            config.tick_hz = hz;
        }
        let mixer = Mixer::new(config.clone())?;

        let mut players = BTreeMap::new();
        let mut udp_port = None;
        for (&id, src) in &scene.sources {
            match &src.origin {
                StreamOrigin::Udp { port } => {
                    udp_port.get_or_insert(*port);
                }
                StreamOrigin::Bvh { path, rate_hz, looping } => {
                    let clip = load_bvh(path, id)?;
                    let period = rate_hz.map_or(clip.frame_time_us(), |r| (1e6 / r).round() as u64);
                    players.insert(id, BvhPlayback::new(clip.frames, period, 0, *looping));
                }
            }
        }
        let listen = opts.listen.unwrap_or(SocketAddr::from(([0, 0, 0, 0], udp_port.unwrap_or(DEFAULT_MOCAP_PORT))));

        let mocap = UdpSocket::bind(listen).with_context(|| format!("binding mocap socket {listen}"))?;
        mocap.set_read_timeout(Some(POLL))?;
        let control = TcpListener::bind(opts.control).with_context(|| format!("binding control port {}", opts.control))?;
        control.set_nonblocking(true)?;
        let ws = TcpListener::bind(opts.ws).with_context(|| format!("binding WebSocket port {}", opts.ws))?;
        ws.set_nonblocking(true)?;
        let posebus = UdpSocket::bind(if opts.posebus.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" })?;

        let shared = Arc::new(Shared::default());
        {
            let mut stores = shared.stores.lock().expect("frame stores");
            for id in config.streams.keys().filter(|id| !players.contains_key(id)) {
                stores.insert(*id, UdpFrameStore::new());
            }
        }
        let (inbox, queue) = mpsc::channel();
        let mocap_addr = mocap.local_addr()?;
        let control_addr = control.local_addr()?;
        let ws_addr = ws.local_addr()?;
        let epoch = Instant::now();

        let mut workers = Vec::new();
        let sh = shared.clone();
        workers.push(std::thread::spawn(move || receive_mocap(mocap, sh, epoch)));
        let (sh, ib) = (shared.clone(), inbox.clone());
        workers.push(std::thread::spawn(move || accept_loop(control, sh, ib, serve_tcp)));
        let (sh, ib) = (shared.clone(), inbox);
        workers.push(std::thread::spawn(move || accept_loop(ws, sh, ib, serve_ws)));

        let sh = shared.clone();
        let loop_state = TickLoop { mixer, players, queue, posebus, posebus_to: opts.posebus, epoch, opts };
        let engine = std::thread::spawn(move || {
            let result = loop_state.run(&sh);
            sh.stop.store(true, Ordering::Relaxed);
            sh.sessions.lock().expect("session table").clear();
            result
        });
        Ok(Self { shared, engine: Some(engine), workers, mocap_addr, control_addr, ws_addr })
    }

    pub fn stop(&self) {
        self.shared.stop.store(true, Ordering::Relaxed);
    }

    /// Waits for the tick loop (and every helper thread) to finish.
    pub fn join(mut self) -> anyhow::Result<LiveSummary> {
        let result = self.engine.take().expect("joined once").join().expect("tick loop panicked");
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
        let mut summary = result?;
        summary.frames_received = self.shared.frames_received.load(Ordering::Relaxed);
        summary.frames_undecodable = self.shared.frames_undecodable.load(Ordering::Relaxed);
        Ok(summary)
    }
}

impl Drop for LiveEngine {
    fn drop(&mut self) {
        self.stop();
    }
}

fn micros_since(epoch: Instant) -> u64 {
    epoch.elapsed().as_micros() as u64
}

fn receive_mocap(sock: UdpSocket, shared: Arc<Shared>, epoch: Instant) {
    let mut buf = vec![0u8; 65536];
    while !shared.stopped() {
        let n = match sock.recv(&mut buf) {
            Ok(n) => n,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => continue,
            Err(_) => continue,
        };
        match decode_frame(&buf[..n]) {
            Ok(frame) => {
                shared.frames_received.fetch_add(1, Ordering::Relaxed);
                let mut stores = shared.stores.lock().expect("frame stores");
                if let Some(store) = stores.get_mut(&frame.stream_id) {
                    store.ingest(frame, micros_since(epoch));
                }
            }
            Err(_) => {
                shared.frames_undecodable.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, inbox: Inbox, serve: fn(TcpStream, Arc<Shared>, Inbox)) {
    while !shared.stopped() {
        match listener.accept() {
            Ok((stream, _)) => {
                let (sh, ib) = (shared.clone(), inbox.clone());
                std::thread::spawn(move || serve(stream, sh, ib));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
            Err(_) => std::thread::sleep(POLL),
        }
    }
}

/// Parses one control line and queues it; malformed lines get an error
/// reply on the same session.
fn handle_line(line: &str, id: u64, shared: &Shared, inbox: &Inbox) {
    let line = line.trim();
    if line.is_empty() {
        return;
    }
    match parse_control(line) {
        Ok(req) => {
            let _ = inbox.send((id, req));
        }
        Err(e) => shared.reply(id, &ServerMessage::Error { message: e.to_string() }),
    }
}

fn serve_tcp(stream: TcpStream, shared: Arc<Shared>, inbox: Inbox) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let Ok(mut writer) = stream.try_clone() else { return };
    if stream.set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (id, outgoing) = shared.open_session();
    let pump = std::thread::spawn(move || {
        for msg in outgoing {
            if writer.write_all(msg.as_bytes()).and_then(|_| writer.write_all(b"\n")).is_err() {
                break;
            }
        }
    });

    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !shared.stopped() {
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                handle_line(&line, id, &shared, &inbox);
                line.clear();
            }
            // A timeout keeps any partial line in `line` for the next call.
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => continue,
            Err(_) => break,
        }
    }
    shared.close_session(id);
    let _ = pump.join();
}

fn serve_ws(stream: TcpStream, shared: Arc<Shared>, inbox: Inbox) {
    use tungstenite::{Error, Message};

    let _ = stream.set_nonblocking(false);
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let Ok(mut ws) = tungstenite::accept(stream) else { return };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (id, outgoing) = shared.open_session();
    'session: while !shared.stopped() {
        while let Ok(msg) = outgoing.try_recv() {
            if ws.send(Message::text(msg)).is_err() {
                break 'session;
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => handle_line(text.as_str(), id, &shared, &inbox),
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    shared.close_session(id);
    let _ = ws.close(None);
    let _ = ws.flush();
}

struct TickLoop {
    mixer: Mixer,
    players: BTreeMap<u8, BvhPlayback>,
    queue: Receiver<(u64, ControlRequest)>,
    posebus: UdpSocket,
    posebus_to: SocketAddr,
    epoch: Instant,
    opts: LiveOptions,
}

impl TickLoop {
    fn gather(&mut self, shared: &Shared, now_us: u64) -> TickInputs {
        let mut inputs = TickInputs::default();
        for (&id, p) in &self.players {
            if let Some(f) = p.frame_at(now_us) {
                inputs.frames.insert(id, StreamSample::Frame(f));
            }
        }
        for (&id, store) in shared.stores.lock().expect("frame stores").iter_mut() {
            match store.stream_tick(now_us) {
                Ok(Some(f)) => {
                    inputs.frames.insert(id, StreamSample::Frame(f));
                }
                Ok(None) => {}
                Err(StreamError::StreamStale { silent_us }) => {
                    inputs.frames.insert(id, StreamSample::Stale { silent_us });
                }
            }
        }

        let config = self.mixer.config();
        let known = |avatar: &str| config.avatars.iter().any(|a| a.avatar_id == avatar);
        while let Ok((session, req)) = self.queue.try_recv() {
            match req {
                ControlRequest::Axes { avatar, input } => {
                    if known(&avatar) {
                        inputs.axes.insert(avatar, stagelink_core::AxisInput { timestamp_us: now_us, ..input });
                    } else {
                        shared.reply(session, &ServerMessage::Error { message: format!("unknown avatar {avatar:?}") });
                    }
                }
                ControlRequest::Command(cmd) => {
                    match &cmd {
                        Command::FireCue { id } if config.cue_sheet.get(id).is_none() => {
                            shared.reply(session, &ServerMessage::Error { message: format!("unknown cue {id:?}") })
                        }
                        Command::Action(a) if !known(a.avatar()) => shared.reply(
                            session,
                            &ServerMessage::Error { message: format!("unknown avatar {:?}", a.avatar()) },
                        ),
                        _ => {}
                    }
                    inputs.commands.push(cmd);
                }
                ControlRequest::SubscribeState => {
                    if let Some(s) = shared.sessions.lock().expect("session table").get_mut(&session) {
                        s.subscribed = true;
                        let _ = s.out.send(encode_server(&ServerMessage::State(self.mixer.snapshot())));
                    }
                }
            }
        }
        inputs
    }

    fn push_state(&self, shared: &Shared) {
        let msg = encode_server(&ServerMessage::State(self.mixer.snapshot()));
        let mut sessions = shared.sessions.lock().expect("session table");
        sessions.retain(|_, s| !s.subscribed || s.out.send(msg.clone()).is_ok());
    }

    fn run(mut self, shared: &Shared) -> anyhow::Result<LiveSummary> {
        let period_us = self.mixer.period_us();
        let push_every = (STATE_PUSH_INTERVAL_US / period_us).max(1);
        let mut recorder = match &self.opts.record {
            Some(path) => {
                let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                Some(SessionWriter::new(std::io::BufWriter::new(file), self.mixer.config())?)
            }
            None => None,
        };
        let mut summary = LiveSummary::default();
        let stdout = std::io::stdout();

        while !shared.stopped() && self.opts.ticks.is_none_or(|n| summary.ticks < n) {
            let now_us = self.mixer.now_us();
            let late = micros_since(self.epoch).saturating_sub(now_us);
            if late > period_us {
                summary.late_ticks += 1;
            } else if now_us > micros_since(self.epoch) {
                std::thread::sleep(Duration::from_micros(now_us - micros_since(self.epoch)));
            }

            let inputs = self.gather(shared, now_us);
            let out = self.mixer.tick(&inputs);
            for p in &out.poses {
                let msg = PoseMessage::from_pose(out.tick_no, p.bus_id, &p.pose)?;
                match self.posebus.send_to(&encode_pose_msg(&msg), self.posebus_to) {
                    Ok(_) => summary.poses_sent += 1,
                    Err(_) => summary.poses_dropped += 1,
                }
            }
            if self.opts.print_events && !out.events.is_empty() {
                let mut lock = stdout.lock();
                for e in &out.events {
                    let _ = writeln!(lock, "{}", serde_json::to_string(e)?);
                }
            }
            if let Some(w) = recorder.as_mut() {
                w.record(&inputs, &out)?;
            }
            summary.ticks += 1;
            if out.tick_no.is_multiple_of(push_every) {
                self.push_state(shared);
            }
        }
        if let Some(w) = recorder {
            w.finish()?;
        }
        Ok(summary)
    }
}
