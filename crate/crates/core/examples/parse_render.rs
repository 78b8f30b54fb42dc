//! Reading a model response into typed danmaku, and writing one.
//!
//! `cargo run -p comet-core --example parse_render`

use comet_core::persona::{Persona, PersonaSet};
use comet_core::track_parser::{parse_track, render_track};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/sample_response.md");
    let personas = PersonaSet {
        video_id: "latin".into(),
        personas: "ABCDEF"
            .chars()
            .map(|label| Persona {
                label,
                age: 20,
                region: String::new(),
                personality: String::new(),
                danmaku_sending_style: String::new(),
                learning_habits: String::new(),
                reasons_for_watching: String::new(),
            })
            .collect(),
    };
    let (track, warnings) = parse_track(&std::fs::read_to_string(path).unwrap(), &personas, 270.0).unwrap();
    println!("{} danmaku, {} warnings", track.len(), warnings.len());
    for d in track.danmaku.iter().filter(|d| d.reply_to.is_some()).take(5) {
        let to = track.get(d.reply_to.as_deref().unwrap()).unwrap();
        println!(
            "{} {}@{} replies to {}@{}: {}",
            d.id,
            d.persona_label.unwrap(),
            d.time_s,
            to.persona_label.unwrap(),
            to.time_s,
            d.text
        );
    }

    let md = render_track(&track);
    assert_eq!(parse_track(&md, &personas, 270.0).unwrap().0, track);
    println!("\n{}", md.lines().take(12).collect::<Vec<_>>().join("\n"));
}
