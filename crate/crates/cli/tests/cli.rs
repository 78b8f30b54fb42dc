use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn comet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comet")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_a_clean_track() {
    let dir = tempfile::tempdir().unwrap();
    let out = comet(&[
        "generate",
        "--manifest",
        s(&fixture("latin_300s.json")),
        "--backend",
        "mock",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("remaining violations 0"), "{stdout}");
    let track = dir.path().join("videos/latin-300/track.json");
    assert!(track.is_file());
    assert!(dir.path().join("videos/latin-300/schedule.json").is_file());

    let check = comet(&["validate", "--track", s(&track), "--duration", "300"]);
    assert_eq!(check.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&check.stdout).unwrap();
    assert_eq!(report["violations"], serde_json::json!([]));
}

#[test]
fn same_seed_same_track_file() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = comet(&[
            "generate",
            "--manifest",
            s(&fixture("latin_300s.json")),
            "--seed",
            "11",
            "--backend",
            "mock",
            "--out-dir",
            s(d.path()),
        ]);
        assert!(out.status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("videos/latin-300/track.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn violations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("sample.json");
    let conv = comet(&[
        "convert",
        "--in",
        s(&fixture("sample_response.md")),
        "--to",
        "json",
        "--duration",
        "270",
        "--out",
        s(&json),
    ]);
    assert!(conv.status.success(), "{}", String::from_utf8_lossy(&conv.stderr));
    let out = comet(&["validate", "--track", s(&json), "--duration", "270"]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["violations"].as_array().unwrap().iter().any(|v| v["rule"] == "R3_ContentRate"));
}

#[test]
fn failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(comet(&["validate", "--track", s(&missing), "--duration", "10"]).status.code(), Some(1));
    assert_eq!(comet(&["stats", "--track", s(&fixture("sample_scenes.md"))]).status.code(), Some(1));

    let mut manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("latin_300s.json")).unwrap()).unwrap();
    manifest["duration_s"] = serde_json::json!(0.0);
    manifest["transcript"] = serde_json::json!([]);
    manifest["frame_scores"] = serde_json::Value::Null;
    manifest["frame_captions"] = serde_json::Value::Null;
    let bad = dir.path().join("zero.json");
    std::fs::write(&bad, manifest.to_string()).unwrap();
    let out = comet(&["generate", "--manifest", s(&bad), "--backend", "mock", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no duration"));
}

#[test]
fn convert_round_trips_through_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let md_in = fixture("sample_response.md");
    let json = dir.path().join("t.json");
    let md = dir.path().join("t.md");
    let json2 = dir.path().join("t2.json");
    for (input, to, out) in [(&md_in, "json", &json), (&json, "markdown", &md), (&md, "json", &json2)] {
        let r = comet(&[
            "convert",
            "--in",
            s(input),
            "--to",
            to,
            "--duration",
            "270",
            "--video-id",
            "sample_response",
            "--out",
            s(out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(std::fs::read(&json).unwrap(), std::fs::read(&json2).unwrap());

    let xml = comet(&["convert", "--in", s(&json), "--to", "xml"]);
    assert!(xml.status.success());
    let xml_path = dir.path().join("t.xml");
    std::fs::write(&xml_path, &xml.stdout).unwrap();
    let back = comet(&["convert", "--in", s(&xml_path), "--to", "xml"]);
    assert!(back.status.success());
    let texts = |b: &[u8]| {
        String::from_utf8_lossy(b)
            .lines()
            .filter_map(|l| l.split_once("\">").map(|(_, t)| t.to_string()))
            .collect::<Vec<_>>()
    };
    assert_eq!(texts(&xml.stdout), texts(&back.stdout));
    assert_eq!(texts(&back.stdout).len(), 53);
}

#[test]
fn stats_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("t.json");
    comet(&[
        "convert",
        "--in",
        s(&fixture("sample_response.md")),
        "--to",
        "json",
        "--duration",
        "270",
        "--out",
        s(&json),
    ]);
    let out = comet(&["stats", "--track", s(&json), "--duration", "270"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["total"], 53);
    assert_eq!(v["per_type"]["qa"], 10);
    let rate = v["rate_per_min"].as_f64().unwrap();
    assert!((rate - 53.0 * 60.0 / 270.0).abs() < 1e-9);
}

#[test]
fn help_lists_every_subcommand() {
    let out = comet(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["generate", "validate", "convert", "stats", "serve"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
