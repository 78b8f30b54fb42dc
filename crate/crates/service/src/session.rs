//! Per-client delivery window driven by position heartbeats.
//!
//! The client owns the clock. Each heartbeat moves the cursor; each poll returns
//! the records whose time falls inside `[floor, position + lookahead]` that this
//! session has not yet seen since its last reset.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use comet_core::{Danmaku, DanmakuTrack};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    pub lookahead_s: f64,
    /// A backward jump larger than this is a seek.
    pub seek_back_s: f64,
    pub expiry: Duration,
}

impl Default for StreamParams {
    fn default() -> Self {
        StreamParams { lookahead_s: 10.0, seek_back_s: 2.0, expiry: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("session expired")]
pub struct SessionExpired;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CursorMove {
    Forward,
    /// Backward jump past the seek threshold; the window was reset.
    Seek,
    /// Forward jump past the lookahead; records behind the new window are skipped.
    Skip,
}

/// One record on the wire: the danmaku plus whether this session saw it before.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delivery {
    #[serde(flatten)]
    pub danmaku: Danmaku,
    pub replay: bool,
}

#[derive(Debug, Clone)]
pub struct StreamSession {
    pub session_id: String,
    pub video_id: String,
    pub position_s: f64,
    pub last_delivered_s: f64,
    params: StreamParams,
    floor_s: f64,
    epoch: HashSet<String>,
    seen: HashSet<String>,
    last_heartbeat: Instant,
}

impl StreamSession {
    pub fn new(session_id: impl Into<String>, video_id: impl Into<String>, params: StreamParams, now: Instant) -> Self {
        StreamSession {
            session_id: session_id.into(),
            video_id: video_id.into(),
            position_s: 0.0,
            last_delivered_s: 0.0,
            params,
            floor_s: 0.0,
            epoch: HashSet::new(),
            seen: HashSet::new(),
            last_heartbeat: now,
        }
    }

    pub fn params(&self) -> &StreamParams {
        &self.params
    }

    pub fn is_expired(&self, now: Instant) -> bool {
        now.saturating_duration_since(self.last_heartbeat) > self.params.expiry
    }

    pub fn heartbeat(&mut self, position_s: f64, now: Instant) -> Result<CursorMove, SessionExpired> {
        if self.is_expired(now) {
            return Err(SessionExpired);
        }
        let position_s = if position_s.is_finite() { position_s.max(0.0) } else { self.position_s };
        let lookahead = self.params.lookahead_s;
        let mv = if position_s < self.position_s - self.params.seek_back_s {
            self.epoch.clear();
            self.floor_s = (position_s - lookahead).max(0.0);
            self.last_delivered_s = self.floor_s;
            CursorMove::Seek
        } else if position_s > self.position_s + lookahead {
            self.floor_s = self.floor_s.max(position_s - lookahead);
            CursorMove::Skip
        } else {
            CursorMove::Forward
        };
        self.position_s = position_s;
        self.last_heartbeat = now;
        Ok(mv)
    }

    /// Records now due, in track order. A record is due once the cursor is within
    /// the lookahead of it.
    pub fn poll(&mut self, track: &DanmakuTrack, now: Instant) -> Result<Vec<Delivery>, SessionExpired> {
        if self.is_expired(now) {
            return Err(SessionExpired);
        }
        let horizon = self.position_s + self.params.lookahead_s;
        let mut out = Vec::new();
        for d in &track.danmaku {
            if d.time_s > horizon {
                break;
            }
            if d.time_s < self.floor_s || self.epoch.contains(&d.id) {
                continue;
            }
            self.epoch.insert(d.id.clone());
            let replay = !self.seen.insert(d.id.clone());
            self.last_delivered_s = self.last_delivered_s.max(d.time_s);
            out.push(Delivery { danmaku: d.clone(), replay });
        }
        Ok(out)
    }
}
