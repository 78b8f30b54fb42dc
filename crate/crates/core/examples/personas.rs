//! The persona prompt, a mock persona set, and parsing it back from JSON.
//!
//! `cargo run -p comet-core --example personas`

use comet_core::llm_client::generate_mock_personas;
use comet_core::persona::{build_persona_prompt, parse_personas, PERSONA_COUNT};

fn main() {
    let title = "How to Pronounce Latin: The Alphabet";
    println!("{}\n", build_persona_prompt(title, PERSONA_COUNT));

    let set = generate_mock_personas("latin-300", title, PERSONA_COUNT, 7);
    for p in &set.personas {
        println!("{}: {} from {}, {}", p.label, p.age, p.region, p.personality);
    }

    // models often wrap the object in prose or a code fence
    let wrapped = format!("Here are the viewers:\n```json\n{}\n```", set.to_json_pretty());
    assert_eq!(parse_personas(&wrapped, "latin-300").unwrap(), set);
    println!("\nparsed back {} personas", set.personas.len());
}
