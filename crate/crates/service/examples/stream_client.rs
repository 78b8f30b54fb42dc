//! Starts the service on a free port, then plays the first 30 s of a video as
//! a client would: open the stream, send position heartbeats, post a comment.
//!
//! `cargo run -p comet-service --example stream_client`
//!
//! To serve a catalog for real, use `comet serve --data-dir <dir>`.

use std::time::Duration;

use comet_core::llm_client::{LmmClient, MockBackend};
use comet_core::pipeline::{run_job, RunOptions};
use comet_core::store::Catalog;
use comet_core::{GenerationConfig, VideoManifest};
use comet_service::{router, AppState, ServiceConfig};
use futures::StreamExt;
use serde_json::json;

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/latin_300s.json");
    let manifest = VideoManifest::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let catalog = Catalog::open(dir.path()).unwrap();
    let config = GenerationConfig::default();
    let client = LmmClient::new(MockBackend::new(manifest.clone(), config.clone(), 7));
    run_job(&manifest, &config, &client, &RunOptions { catalog: Some(catalog), ..RunOptions::default() }, |_| {})
        .unwrap();

    let state = AppState::new(ServiceConfig::new(dir.path())).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    println!("serving on {base}");

    let http = reqwest::Client::new();
    let videos: serde_json::Value = http.get(format!("{base}/videos")).send().await.unwrap().json().await.unwrap();
    println!("GET /videos -> {videos}");

    let video = &manifest.id;
    let resp = http.get(format!("{base}/videos/{video}/stream?session=demo")).send().await.unwrap();
    let mut body = resp.bytes_stream();
    let reader = tokio::spawn(async move {
        let mut buf = String::new();
        while let Some(Ok(chunk)) = body.next().await {
            buf.push_str(&String::from_utf8_lossy(&chunk));
            while let Some(end) = buf.find("\n\n") {
                let frame: String = buf.drain(..end + 2).collect();
                println!("  sse {}", frame.trim().replace('\n', " | "));
            }
        }
    });

    for pos in (0..=30).step_by(5) {
        println!("heartbeat {pos} s");
        http.post(format!("{base}/videos/{video}/cursor"))
            .json(&json!({"session": "demo", "position_s": pos}))
            .send()
            .await
            .unwrap();
        if pos == 10 {
            let posted: serde_json::Value = http
                .post(format!("{base}/videos/{video}/danmaku"))
                .json(&json!({"time_s": 12.0, "text": "which letters were added later?", "color": "#00ff00"}))
                .send()
                .await
                .unwrap()
                .json()
                .await
                .unwrap();
            println!("posted {}", posted["id"]);
        }
        tokio::time::sleep(Duration::from_millis(150)).await;
    }
    reader.abort();
}
