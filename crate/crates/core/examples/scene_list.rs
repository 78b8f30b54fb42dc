//! Parsing a scene-list response and rendering it back.
//!
//! `cargo run -p comet-core --example scene_list`

use comet_core::video_model::{parse_clip_descriptions, render_clip_descriptions};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/sample_scenes.md");
    let parsed = parse_clip_descriptions(&std::fs::read_to_string(path).unwrap(), 340.0).unwrap();
    for clip in &parsed.clips {
        println!("{:>7.2} - {:>7.2}  {}", clip.start_s, clip.end_s, clip.title.as_deref().unwrap_or("?"));
    }
    println!("{} warnings", parsed.warnings.len());

    let again = parse_clip_descriptions(&render_clip_descriptions(&parsed.clips), 340.0).unwrap();
    assert_eq!(again.clips, parsed.clips);
    println!("render/parse round trip ok");
}
