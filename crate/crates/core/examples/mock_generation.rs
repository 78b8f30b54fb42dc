//! The deterministic mock model: same seed, same response.
//!
//! `cargo run -p comet-core --example mock_generation`

use comet_core::llm_client::{generate_mock_personas, generate_mock_track};
use comet_core::{GenerationConfig, VideoManifest};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let config = GenerationConfig::default();
    let personas = generate_mock_personas(&manifest.id, &manifest.title, 6, 7);

    let response = generate_mock_track(&manifest, &personas, &config, 7);
    assert_eq!(response, generate_mock_track(&manifest, &personas, &config, 7));
    for line in response.lines().take(24) {
        println!("{line}");
    }
    println!("... {} lines in all", response.lines().count());
}
