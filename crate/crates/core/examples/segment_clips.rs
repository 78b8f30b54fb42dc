//! Scene segmentation, frame sampling and the clip-description prompt.
//!
//! `cargo run -p comet-core --example segment_clips`

use comet_core::video_model::{
    build_clip_description_prompt, frame_refs, sample_frame_times, segment_scenes, SegmentationParams,
    TextLevelDescription,
};
use comet_core::VideoManifest;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();

    let clips = segment_scenes(&manifest, &SegmentationParams::default()).unwrap();
    println!("{} clips over {} s", clips.len(), manifest.duration_s);
    for clip in &clips {
        let times = sample_frame_times(clip).unwrap();
        println!("  #{:<2} [{:>6.2}, {:>6.2}]  {} frames", clip.index, clip.start_s, clip.end_s, times.len());
    }

    let first = &clips[0];
    let frames = frame_refs(&manifest, &sample_frame_times(first).unwrap());
    let prompt = build_clip_description_prompt(first, &frames, &manifest.transcript_slice(first.start_s, first.end_s));
    println!("\n--- prompt for clip 1 ---\n{prompt}");

    let text = TextLevelDescription::from_manifest(&manifest).to_canonical_json();
    println!("--- text-level description: {} bytes ---", text.len());
}
