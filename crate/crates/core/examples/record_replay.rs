//! Recording model calls to a cassette and replaying them without a model.
//!
//! `cargo run -p comet-core --example record_replay`

use comet_core::llm_client::{
    LmmBackend, LmmClient, LmmRequest, MockBackend, RecordingBackend, ReplayBackend, RetryPolicy,
};
use comet_core::persona::build_persona_prompt;
use comet_core::{GenerationConfig, VideoManifest};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let tape = dir.path().join("cassette.json");

    // any backend can sit inside the recorder; an HTTP one is the usual choice
    let live = MockBackend::new(manifest.clone(), GenerationConfig::default(), 7);
    let client = LmmClient::new(RecordingBackend::new(live, &tape)).with_policy(RetryPolicy::default());
    let req = LmmRequest::new("You are a helpful assistant.", build_persona_prompt(&manifest.title, 6));
    let first = client.complete(&req).unwrap();
    println!("recorded {} bytes from {}", first.text.len(), first.model_id);

    let replay = ReplayBackend::load(&tape).unwrap();
    let again = replay.complete(&req).unwrap();
    assert_eq!(again.text, first.text);
    println!("replayed identical text");
    println!("unrecorded request: {:?}", replay.complete(&LmmRequest::new("s", "u")).unwrap_err());
}
