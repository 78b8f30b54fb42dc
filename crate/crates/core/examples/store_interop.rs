//! The on-disk catalog, and exchanging tracks as `<d p="...">` XML.
//!
//! `cargo run -p comet-core --example store_interop`

use comet_core::llm_client::{generate_mock_personas, mock_track};
use comet_core::store::{export_interop_xml, import_interop_xml, Catalog};
use comet_core::{GenerationConfig, VideoManifest};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let track = mock_track(
        &manifest,
        &generate_mock_personas(&manifest.id, &manifest.title, 6, 7),
        &GenerationConfig::default(),
        7,
    );

    let dir = tempfile::tempdir().unwrap();
    let catalog = Catalog::open(dir.path()).unwrap();
    catalog.save_manifest(&manifest).unwrap();
    catalog.save_track(&track).unwrap();
    println!("catalog lists {:?}", catalog.list_videos().unwrap());
    assert_eq!(catalog.load_track(&manifest.id).unwrap(), track);

    let xml = export_interop_xml(&track);
    let text = String::from_utf8_lossy(&xml);
    for line in text.lines().take(6) {
        println!("{line}");
    }

    let imported = import_interop_xml(&xml, "copy", manifest.duration_s).unwrap();
    println!("imported {} records, {} warnings", imported.track.len(), imported.warnings.len());
    let d = &imported.track.danmaku[0];
    println!("first: {:?} {:?} at {} s: {}", d.dtype, d.position, d.time_s, d.text);
}
