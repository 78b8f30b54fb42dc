use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LlmError, LmmBackend, LmmRequest, LmmResponse};
use crate::store::write_atomic;

/// One recorded exchange, keyed by a hash of both messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub response: LmmResponse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn key(req: &LmmRequest) -> String {
        let mut h = Sha256::new();
        h.update(req.system.as_bytes());
        h.update([0u8]);
        h.update(req.user.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        let json = serde_json::to_string_pretty(self).expect("cassette serializes");
        write_atomic(path, json.as_bytes()).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))
    }

    pub fn find(&self, req: &LmmRequest) -> Option<&LmmResponse> {
        let key = Cassette::key(req);
        self.entries.iter().find(|e| e.key == key).map(|e| &e.response)
    }
}

/// Passes calls through and appends each successful exchange to a cassette file.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    tape: Mutex<Cassette>,
}

impl<B: LmmBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl Into<PathBuf>) -> Self {
        RecordingBackend { inner, path: path.into(), tape: Mutex::new(Cassette::default()) }
    }
}

impl<B: LmmBackend> LmmBackend for RecordingBackend<B> {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        let resp = self.inner.complete(req)?;
        let mut tape = self.tape.lock().unwrap_or_else(|e| e.into_inner());
        tape.entries.push(CassetteEntry { key: Cassette::key(req), response: resp.clone() });
        tape.save(&self.path)?;
        Ok(resp)
    }
}

/// Serves responses from a cassette; unknown requests are a configuration error.
pub struct ReplayBackend {
    tape: Cassette,
}

impl ReplayBackend {
    pub fn new(tape: Cassette) -> Self {
        ReplayBackend { tape }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Cassette::load(path).map(ReplayBackend::new)
    }
}

impl LmmBackend for ReplayBackend {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        self.tape
            .find(req)
            .cloned()
            .ok_or_else(|| LlmError::Config(format!("no recorded response for request {}", Cassette::key(req))))
    }
}
