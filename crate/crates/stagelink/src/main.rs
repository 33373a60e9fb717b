use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use stagelink::net::{LiveEngine, LiveOptions};
use stagelink::scenario::{default_assets_dir, ScenarioOptions};
use stagelink::{play_bvh, run_scenario, tick_hz_from_env, PlayOptions};
use stagelink_core::bus::session::check_config;
use stagelink_core::bus::{read_session, replay, Verdict};
use stagelink_core::{load_cue_sheet, load_scene};

#[derive(Parser)]
#[command(name = "stagelink", version, about = "Real-time avatar staging engine")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the live engine.
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        cues: Option<PathBuf>,
        /// Mocap UDP address [default: the scene's stream port on 0.0.0.0]
        #[arg(long, value_parser = parse_addr)]
        listen: Option<SocketAddr>,
        /// Pose bus destination.
        #[arg(long, value_parser = parse_addr, default_value = "127.0.0.1:7001")]
        posebus: SocketAddr,
        /// TCP control address.
        #[arg(long, value_parser = parse_addr, default_value = "0.0.0.0:7002")]
        control: SocketAddr,
        /// WebSocket control address.
        #[arg(long, value_parser = parse_addr, default_value = "0.0.0.0:7003")]
        ws: SocketAddr,
        /// Stop after this many ticks.
        #[arg(long)]
        ticks: Option<u64>,
        /// Write a session log.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Print engine events as JSON lines.
        #[arg(long)]
        events: bool,
    },
    /// Run a scripted, self-checking exercise.
    Scenario {
        #[arg(value_parser = ["walking", "watching", "crowd"])]
        name: String,
        #[arg(long)]
        record: Option<PathBuf>,
        /// Keep the manipulator idle (negative control).
        #[arg(long)]
        no_manipulator: bool,
        #[arg(long)]
        ticks: Option<u64>,
        /// Directory holding the scenario scenes, cue sheets and clips.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Stream a BVH file as mocap datagrams.
    Play {
        #[arg(long)]
        bvh: PathBuf,
        #[arg(long, value_parser = parse_addr)]
        to: SocketAddr,
        /// Frames per second [default: the file's frame time]
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long = "loop")]
        looping: bool,
        /// Stop after this many frames.
        #[arg(long)]
        count: Option<u64>,
        #[arg(long, default_value_t = 0)]
        stream: u8,
    },
    /// Inspect or verify a session log.
    Replay {
        log: PathBuf,
        /// Re-run the engine and compare every output.
        #[arg(long)]
        verify: bool,
        /// Refuse the log unless it was recorded with this scene.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, requires = "scene")]
        cues: Option<PathBuf>,
    },
}

/// `host:port`, or a bare port on all interfaces.
fn parse_addr(s: &str) -> Result<SocketAddr, String> {
    if let Ok(port) = s.parse::<u16>() {
        return Ok(SocketAddr::from(([0, 0, 0, 0], port)));
    }
    s.to_socket_addrs()
        .map_err(|e| format!("{s}: {e}"))?
        .next()
        .ok_or_else(|| format!("{s}: no address"))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let tick_hz = tick_hz_from_env();
    match cli.command {
        Cmd::Run { scene, cues, listen, posebus, control, ws, ticks, record, events } => {
            let opts = LiveOptions { cues, listen, posebus, control, ws, tick_hz, ticks, record, print_events: events, ..LiveOptions::new(scene) };
            let engine = LiveEngine::start(opts)?;
            eprintln!(
                "stagelink: mocap on {}, control on {}, WebSocket on {}",
                engine.mocap_addr, engine.control_addr, engine.ws_addr
            );
            let s = engine.join()?;
            eprintln!(
                "stagelink: {} ticks ({} late), {} poses sent, {} dropped, {} mocap frames received",
                s.ticks, s.late_ticks, s.poses_sent, s.poses_dropped, s.frames_received
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Scenario { name, record, no_manipulator, ticks, assets, json } => {
            let opts = ScenarioOptions {
                assets: assets.unwrap_or_else(default_assets_dir),
                ticks,
                tick_hz,
                no_manipulator,
                record,
            };
            let report = run_scenario(&name, &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Play { bvh, to, rate, looping, count, stream } => {
            let sent = play_bvh(&bvh, &PlayOptions { to, stream_id: stream, rate_hz: rate, looping, limit: count })?;
            println!("{sent} frames sent");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Replay { log, verify, scene, cues } => {
            let bytes = std::fs::read(&log).with_context(|| format!("reading {}", log.display()))?;
            let session = read_session(&bytes)?;
            if let Some(scene) = scene {
                let mut config = load_scene(&scene)?.config;
                if let Some(c) = cues {
                    config.cue_sheet = load_cue_sheet(&std::fs::read_to_string(&c)?)?;
                }
                check_config(&session, &config)?;
            }
            if !verify {
                let h = &session.header;
                println!(
                    "{} ticks at {} Hz, {} avatars, {} cues",
                    session.ticks.len(),
                    h.tick_hz,
                    h.config.avatars.len(),
                    h.config.cue_sheet.len()
                );
                return Ok(ExitCode::SUCCESS);
            }
            let verdict = replay(&session)?;
            println!("{verdict}");
            Ok(match verdict {
                Verdict::Identical { .. } => ExitCode::SUCCESS,
                Verdict::Diverged { .. } => ExitCode::FAILURE,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("stagelink: {e:#}");
            ExitCode::from(2)
        }
    }
}
