//! A whole generation job against the mock model, persisted to a catalog.
//!
//! `cargo run -p comet-core --example full_pipeline [seed]`

use comet_core::llm_client::{LmmClient, MockBackend};
use comet_core::pipeline::{run_job, RunOptions};
use comet_core::store::Catalog;
use comet_core::{GenerationConfig, VideoManifest};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let config = GenerationConfig::default();

    let dir = tempfile::tempdir().unwrap();
    let catalog = Catalog::open(dir.path()).unwrap();
    let client = LmmClient::new(MockBackend::new(manifest.clone(), config.clone(), seed));
    let opts = RunOptions { job_id: "job-example".into(), catalog: Some(catalog.clone()), ..RunOptions::default() };
    let out = run_job(&manifest, &config, &client, &opts, |job| println!("-> {:?}", job.state)).unwrap();

    println!("{} clips, {} personas, {} danmaku", out.clips.len(), out.personas.personas.len(), out.track.len());
    for m in &out.report.per_minute_stats {
        println!("  minute {}: {} content, {} emotion, {} highlights", m.minute, m.content, m.emotion, m.highlight);
    }
    println!("max gap {:.2} s, {} violations left", out.report.max_gap_s, out.report.violations.len());
    for entry in std::fs::read_dir(catalog.video_dir(&manifest.id)).unwrap() {
        println!("  wrote {}", entry.unwrap().file_name().to_string_lossy());
    }
}
