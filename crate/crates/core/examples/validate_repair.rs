//! Checking a track against the generation rules and repairing it.
//!
//! `cargo run -p comet-core --example validate_repair`

use comet_core::llm_client::{generate_mock_personas, mock_track};
use comet_core::validator::{repair, track_stats, validate};
use comet_core::{Danmaku, DanmakuType, GenerationConfig, VideoManifest};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let config = GenerationConfig::default();
    let personas = generate_mock_personas(&manifest.id, &manifest.title, 6, 7);
    let mut track = mock_track(&manifest, &personas, &config, 7);

    // break it: one rambling comment, and a silent stretch in minute 3
    track.insert_sorted(Danmaku::new(
        "d9999",
        Some('A'),
        50.0,
        DanmakuType::Discussion,
        "this one goes on and on far past the length that any viewer would read",
    ));
    track.danmaku.retain(|d| !(150.0..200.0).contains(&d.time_s));

    let report = validate(&track, manifest.duration_s, &config);
    println!("before repair: {} violations", report.violations.len());
    for (rule, n) in report.counts() {
        println!("  {rule}: {n}");
    }

    let (fixed, after) = repair(&track, &report, manifest.duration_s, &config, None);
    println!("after repair: {} violations, {} repair actions", after.violations.len(), after.repaired.len());
    for e in after.repaired.iter().take(8) {
        println!("  {:?} {} {}", e.action, e.rule, e.id.as_deref().unwrap_or("-"));
    }

    let stats = track_stats(&fixed, manifest.duration_s, config.length_unit);
    println!("{:.1} danmaku/min, {:.1}x the organic rate", stats.rate_per_min, stats.density_ratio());
}
