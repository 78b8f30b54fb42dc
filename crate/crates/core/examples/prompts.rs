//! Assembling the generation prompt from a config, personas and clips.
//!
//! `cargo run -p comet-core --example prompts`

use comet_core::llm_client::generate_mock_personas;
use comet_core::prompting::{with_feedback, IntRange, PromptBundle};
use comet_core::video_model::{segment_scenes, SegmentationParams, TextLevelDescription};
use comet_core::{GenerationConfig, VideoManifest};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let personas = generate_mock_personas(&manifest.id, &manifest.title, 6, 7);
    let clips = segment_scenes(&manifest, &SegmentationParams::default()).unwrap();

    let config =
        GenerationConfig { content_per_min: IntRange::new(10, 20), max_len_units: 10, ..GenerationConfig::default() };
    let bundle = PromptBundle::new(&config, &personas, &clips, &TextLevelDescription::from_manifest(&manifest));
    println!("{}", bundle.system_text);
    println!("user message: {} bytes", bundle.user_text.len());

    let retry = with_feedback(&bundle.user_text, &["Minute 2 has 9 content danmaku; it needs at least 10.".into()]);
    println!("\n...with feedback appended:\n{}", &retry[bundle.user_text.len()..]);
}
