#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use comet_core::llm_client::{LmmClient, MockBackend};
use comet_core::pipeline::{run_job, RunOptions};
use comet_core::store::Catalog;
use comet_core::{Danmaku, GenerationConfig, VideoManifest};
use comet_service::{router, AppState, ServiceConfig};
use futures::StreamExt;
use serde_json::Value;
use tempfile::TempDir;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn latin_manifest() -> VideoManifest {
    VideoManifest::from_json(&std::fs::read_to_string(fixture("latin_300s.json")).unwrap()).unwrap()
}

/// A catalog holding the fixture manifest and a mock-generated track.
pub fn seeded_catalog(dir: &TempDir) -> (Catalog, VideoManifest) {
    let catalog = Catalog::open(dir.path()).unwrap();
    let manifest = latin_manifest();
    catalog.save_manifest(&manifest).unwrap();
    let config = GenerationConfig::default();
    let client = LmmClient::new(MockBackend::new(manifest.clone(), config.clone(), 7));
    let opts = RunOptions { catalog: Some(catalog.clone()), ..RunOptions::default() };
    run_job(&manifest, &config, &client, &opts, |_| {}).unwrap();
    (catalog, manifest)
}

pub struct Server {
    pub base: String,
    pub state: Arc<AppState>,
    pub dir: TempDir,
}

pub async fn start(configure: impl FnOnce(&mut ServiceConfig)) -> Server {
    let dir = tempfile::tempdir().unwrap();
    seeded_catalog(&dir);
    let mut config = ServiceConfig::new(dir.path());
    configure(&mut config);
    let state = AppState::new(config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { base, state, dir }
}

#[derive(Debug, Clone)]
pub struct SseEvent {
    pub event: String,
    pub data: String,
}

/// Minimal `text/event-stream` reader.
pub struct SseReader {
    body: futures::stream::BoxStream<'static, reqwest::Result<bytes::Bytes>>,
    buf: String,
}

impl SseReader {
    pub async fn open(url: &str) -> SseReader {
        let resp = reqwest::get(url).await.unwrap();
        assert_eq!(resp.status(), 200, "stream open failed");
        SseReader { body: resp.bytes_stream().boxed(), buf: String::new() }
    }

    pub async fn next(&mut self, within: Duration) -> Option<SseEvent> {
        let deadline = tokio::time::Instant::now() + within;
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let frame: String = self.buf.drain(..end + 2).collect();
                let mut ev = SseEvent { event: "message".into(), data: String::new() };
                let mut has_data = false;
                for line in frame.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        ev.event = v.trim().to_string();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        if has_data {
                            ev.data.push('\n');
                        }
                        ev.data.push_str(v.strip_prefix(' ').unwrap_or(v));
                        has_data = true;
                    }
                }
                if has_data {
                    return Some(ev);
                }
                continue;
            }
            let chunk = tokio::time::timeout_at(deadline, self.body.next()).await.ok()??.ok()?;
            self.buf.push_str(&String::from_utf8_lossy(&chunk));
        }
    }

    /// Next `danmaku` event, as the record plus its replay flag.
    pub async fn next_danmaku(&mut self, within: Duration) -> Option<(Danmaku, bool)> {
        loop {
            let ev = self.next(within).await?;
            if ev.event == "danmaku" {
                return Some(split_delivery(&ev.data));
            }
        }
    }
}

pub fn split_delivery(data: &str) -> (Danmaku, bool) {
    let mut v: Value = serde_json::from_str(data).unwrap();
    let replay = v.as_object_mut().unwrap().remove("replay").unwrap().as_bool().unwrap();
    (serde_json::from_value(v).unwrap(), replay)
}

pub async fn heartbeat(
    client: &reqwest::Client,
    base: &str,
    video: &str,
    session: &str,
    pos: f64,
) -> reqwest::Response {
    client
        .post(format!("{base}/videos/{video}/cursor"))
        .json(&serde_json::json!({"session": session, "position_s": pos}))
        .send()
        .await
        .unwrap()
}
