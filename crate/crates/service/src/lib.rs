//! HTTP front end for a danmaku catalog.
//!
//! | route | |
//! |---|---|
//! | `GET /videos` | catalog list |
//! | `GET /videos/{id}/track` | stored track |
//! | `GET /videos/{id}/danmaku?from=&to=` | records in a time range |
//! | `POST /videos/{id}/danmaku` | post a user danmaku |
//! | `POST /videos/{id}/generate` | start a generation job |
//! | `GET /jobs/{id}` | job status |
//! | `GET /videos/{id}/stream?session=` | server-sent `danmaku` events |
//! | `POST /videos/{id}/cursor` | playback heartbeat `{session, position_s}` |
//!
//! ```no_run
//! # async fn run() -> std::io::Result<()> {
//! let config = comet_service::ServiceConfig::from_env("./data");
//! comet_service::serve(config).await
//! # }
//! ```

mod api;
pub mod session;

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use comet_core::llm_client::{BackendKind, HttpBackend, LlmError, LmmClient, MockBackend};
use comet_core::store::{Catalog, StoreError};
use comet_core::{DanmakuTrack, GenerationConfig, VideoManifest};
use tokio::sync::watch;

pub use api::{router, ApiError, PostDanmakuRequest, VideoSummary, MAX_POST_UNITS};
pub use session::{CursorMove, Delivery, SessionExpired, StreamParams, StreamSession};

pub const ENV_BIND_ADDR: &str = "COMET_BIND_ADDR";
pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";

/// Builds the LMM client for one generation job.
pub type ClientFactory =
    Arc<dyn Fn(&VideoManifest, &GenerationConfig, u64) -> Result<LmmClient, LlmError> + Send + Sync>;

#[derive(Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub bind_addr: SocketAddr,
    pub stream: StreamParams,
    /// Upper bound on how long a stream waits before re-checking its session.
    pub poll_interval: Duration,
    pub default_seed: u64,
    pub client_factory: ClientFactory,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            bind_addr: DEFAULT_BIND_ADDR.parse().expect("valid default address"),
            stream: StreamParams::default(),
            poll_interval: Duration::from_millis(250),
            default_seed: 7,
            client_factory: Arc::new(mock_factory),
        }
    }

    /// Reads `COMET_BIND_ADDR` and the LLM backend variables.
    pub fn from_env(data_dir: impl Into<PathBuf>) -> Self {
        let mut cfg = ServiceConfig::new(data_dir);
        if let Some(addr) = std::env::var(ENV_BIND_ADDR).ok().and_then(|a| a.parse().ok()) {
            cfg.bind_addr = addr;
        }
        cfg.client_factory = Arc::new(env_factory);
        cfg
    }
}

fn mock_factory(manifest: &VideoManifest, config: &GenerationConfig, seed: u64) -> Result<LmmClient, LlmError> {
    Ok(LmmClient::new(MockBackend::new(manifest.clone(), config.clone(), seed)))
}

fn env_factory(manifest: &VideoManifest, config: &GenerationConfig, seed: u64) -> Result<LmmClient, LlmError> {
    match BackendKind::from_env()? {
        BackendKind::Mock => mock_factory(manifest, config, seed),
        BackendKind::Http => Ok(LmmClient::new(HttpBackend::from_env()?)),
    }
}

/// The live view of one video's track that streams read from.
pub(crate) struct Feed {
    track: RwLock<Arc<DanmakuTrack>>,
    changed: watch::Sender<u64>,
}

impl Feed {
    fn new(track: DanmakuTrack) -> Self {
        Feed { track: RwLock::new(Arc::new(track)), changed: watch::channel(0).0 }
    }

    pub(crate) fn snapshot(&self) -> Arc<DanmakuTrack> {
        self.track.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub(crate) fn replace(&self, track: DanmakuTrack) {
        *self.track.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(track);
        self.changed.send_modify(|n| *n += 1);
    }
}

pub(crate) struct SessionHandle {
    pub(crate) session: Mutex<StreamSession>,
    pub(crate) cursor: watch::Sender<u64>,
    pub(crate) feed: Arc<Feed>,
}

pub struct AppState {
    pub(crate) catalog: Catalog,
    pub(crate) config: ServiceConfig,
    feeds: Mutex<HashMap<String, Arc<Feed>>>,
    pub(crate) sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
    pub(crate) active_jobs: Mutex<HashSet<String>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>, StoreError> {
        let catalog = Catalog::open(&config.data_dir)?;
        Ok(Arc::new(AppState {
            catalog,
            config,
            feeds: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            active_jobs: Mutex::new(HashSet::new()),
        }))
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// The stored track, or an empty one for a video that has a manifest but no track yet.
    pub(crate) fn load_track_or_empty(&self, video_id: &str) -> Result<DanmakuTrack, ApiError> {
        match self.catalog.load_track(video_id) {
            Ok(t) => Ok(t),
            Err(StoreError::NotFound(_)) => {
                self.catalog.load_manifest(video_id).map_err(ApiError::from_store)?;
                Ok(DanmakuTrack::new(video_id))
            }
            Err(e) => Err(ApiError::from_store(e)),
        }
    }

    pub(crate) fn feed(&self, video_id: &str) -> Result<Arc<Feed>, ApiError> {
        if let Some(f) = self.feeds.lock().unwrap_or_else(|e| e.into_inner()).get(video_id) {
            return Ok(f.clone());
        }
        let track = self.load_track_or_empty(video_id)?;
        let mut feeds = self.feeds.lock().unwrap_or_else(|e| e.into_inner());
        Ok(feeds.entry(video_id.to_string()).or_insert_with(|| Arc::new(Feed::new(track))).clone())
    }

    /// Re-reads the stored track into the live feed, if one is open.
    pub(crate) fn refresh_feed(&self, video_id: &str) {
        let feed = self.feeds.lock().unwrap_or_else(|e| e.into_inner()).get(video_id).cloned();
        if let Some(feed) = feed {
            match self.load_track_or_empty(video_id) {
                Ok(t) => feed.replace(t),
                Err(e) => tracing::warn!(video = video_id, error = %e, "could not refresh feed"),
            }
        }
    }
}

/// Binds `config.bind_addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let addr = config.bind_addr;
    let state = AppState::new(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state)).await
}
