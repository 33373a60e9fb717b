//! The stagelink engine around its core: scripted scenarios, the live
//! network loop and the BVH stream player.

pub mod fixtures;
pub mod net;
pub mod player;
pub mod scenario;

pub use player::{play_bvh, PlayError, PlayOptions};
pub use scenario::{run_scenario, Assertion, ScenarioError, ScenarioOptions, ScenarioReport, TimingStats};

/// Tick rate from `STAGELINK_TICK_HZ`, if set and valid.
pub fn tick_hz_from_env() -> Option<u32> {
    std::env::var("STAGELINK_TICK_HZ").ok()?.trim().parse().ok().filter(|&hz| hz > 0)
}
