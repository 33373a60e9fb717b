//! The committed clips and rig must be exactly what the generator writes.

use stagelink::fixtures::generated_assets;
use stagelink::scenario::default_assets_dir;

#[test]
fn committed_assets_match_generator() {
    let dir = default_assets_dir();
    for (name, text) in generated_assets() {
        let on_disk = std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(on_disk == text, "{name} is stale; run `cargo run -p stagelink --example gen_fixtures`");
    }
}

#[test]
fn every_scene_loads() {
    let dir = default_assets_dir();
    for scene in ["walking", "watching", "crowd", "stage"] {
        let s = stagelink_core::load_scene(dir.join(format!("{scene}.scene.json"))).unwrap();
        let cues = std::fs::read_to_string(dir.join(format!("{scene}.cues.json"))).unwrap();
        stagelink_core::load_cue_sheet(&cues).unwrap();
        stagelink_core::Mixer::new(s.config).unwrap();
    }
}
