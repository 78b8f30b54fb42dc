//! Assigning scroll lanes and pinned slots, and checking two items for a collision.
//!
//! `cargo run -p comet-core --example lane_layout`

use comet_core::llm_client::{generate_mock_personas, mock_track};
use comet_core::scheduler::{collides, layout, Placement, ScreenConfig};
use comet_core::{GenerationConfig, VideoManifest};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let config = GenerationConfig::default();
    let track = mock_track(&manifest, &generate_mock_personas(&manifest.id, &manifest.title, 6, 7), &config, 7);

    let screen = ScreenConfig::default();
    let schedule = layout(&track, &screen);
    for a in schedule.iter().take(15) {
        let d = track.get(&a.danmaku_id).unwrap();
        let delay = a.enter_s - d.time_s;
        println!(
            "{} {:<6} lane {:>2}  enter {:>6.2} (+{delay:.2})  {:>4}px  {}",
            a.danmaku_id,
            format!("{:?}", a.placement),
            a.lane.map_or("--".into(), |l| l.to_string()),
            a.enter_s,
            a.width_px,
            d.text
        );
    }
    let dropped = schedule.iter().filter(|a| a.is_dropped()).count();
    let delayed = schedule.iter().filter(|a| a.enter_s > track.get(&a.danmaku_id).unwrap().time_s).count();
    println!("{} placed, {delayed} delayed, {dropped} dropped", schedule.len() - dropped);

    let scrolls: Vec<_> = schedule.iter().filter(|a| a.placement == Placement::Scroll && a.lane == Some(0)).collect();
    if let [a, b, ..] = scrolls.as_slice() {
        println!("{} then {} in lane 0 collide: {}", a.danmaku_id, b.danmaku_id, collides(a, b, &screen));
    }
}
