//! Chat-completion gateway: a backend trait, retry with backoff, an in-flight cap,
//! an HTTP backend, a record/replay cassette, and a deterministic mock.
//!
//! Wire format of the HTTP backend (any compatible provider works):
//!
//! ```text
//! POST $COMET_LLM_ENDPOINT
//! Authorization: Bearer $COMET_LLM_KEY
//! {"model": "...", "messages": [{"role": "system", "content": "..."},
//!                               {"role": "user", "content": "..."}],
//!  "temperature": 1.0, "max_tokens": 8192}
//!
//! 200 {"model": "...", "choices": [{"message": {"role": "assistant", "content": "..."}}]}
//! ```

mod cassette;
mod http;
mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

pub use cassette::{Cassette, CassetteEntry, RecordingBackend, ReplayBackend};
pub use http::{HttpBackend, HttpConfig};
pub use mock::{generate_mock_personas, generate_mock_track, mock_track, MockBackend, MOCK_MODEL_ID};

pub const ENV_ENDPOINT: &str = "COMET_LLM_ENDPOINT";
pub const ENV_KEY: &str = "COMET_LLM_KEY";
pub const ENV_MODEL: &str = "COMET_LLM_MODEL";
pub const ENV_BACKEND: &str = "COMET_LLM_BACKEND";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_output_units: u32,
    pub timeout_s: f64,
}

impl LmmRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        LmmRequest {
            system: system.into(),
            user: user.into(),
            temperature: 1.0,
            max_output_units: 8192,
            timeout_s: 120.0,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.system.trim().is_empty() || self.user.trim().is_empty() {
            return Err(LlmError::Config("system and user messages must be non-empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.timeout_s > 0.0) {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmmResponse {
    pub text: String,
    pub model_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("request timed out or endpoint unreachable: {0}")]
    Timeout(String),
    #[error("rate limited (retry after {retry_after_s:?} s)")]
    RateLimited { retry_after_s: Option<f64> },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("service unavailable: {0}")]
    Unavailable(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl LlmError {
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::Timeout(_) | LlmError::RateLimited { .. } | LlmError::Unavailable(_))
    }
}

pub trait LmmBackend: Send + Sync {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError>;
}

impl<B: LmmBackend + ?Sized> LmmBackend for Arc<B> {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        (**self).complete(req)
    }
}

impl<B: LmmBackend + ?Sized> LmmBackend for Box<B> {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        (**self).complete(req)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_secs(1), max_delay: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `n` (1-based): `base * 2^(n-1)`, raised to the
    /// server's retry-after when given, capped at `max_delay`.
    pub fn delay(&self, n: u32, err: &LlmError) -> Duration {
        let backoff = self.base_delay.saturating_mul(1u32 << (n - 1).min(16));
        let hinted = match err {
            LlmError::RateLimited { retry_after_s: Some(s) } if s.is_finite() && *s >= 0.0 => {
                backoff.max(Duration::from_secs_f64(*s))
            }
            _ => backoff,
        };
        hinted.min(self.max_delay)
    }
}

/// Counting gate for concurrent requests.
#[derive(Debug)]
struct Gate {
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// A backend plus retry policy and in-flight cap. Cheap to clone; clones share the cap.
#[derive(Clone)]
pub struct LmmClient {
    backend: Arc<dyn LmmBackend>,
    policy: RetryPolicy,
    gate: Arc<Gate>,
}

pub const DEFAULT_IN_FLIGHT_CAP: usize = 2;

impl LmmClient {
    pub fn new(backend: impl LmmBackend + 'static) -> Self {
        LmmClient {
            backend: Arc::new(backend),
            policy: RetryPolicy::default(),
            gate: Arc::new(Gate { cap: DEFAULT_IN_FLIGHT_CAP, in_flight: Mutex::new(0), freed: Condvar::new() }),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_in_flight_cap(mut self, cap: usize) -> Self {
        self.gate = Arc::new(Gate { cap: cap.max(1), in_flight: Mutex::new(0), freed: Condvar::new() });
        self
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    /// Sends the request, retrying transient failures. Returns the last error once
    /// the attempts are used up.
    pub fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        req.validate()?;
        let attempts = self.policy.attempts.max(1);
        let mut n = 1;
        loop {
            let started = Instant::now();
            let result = {
                let _permit = self.gate.acquire();
                self.backend.complete(req)
            };
            match result {
                Ok(mut resp) => {
                    if resp.latency_ms == 0 {
                        resp.latency_ms = started.elapsed().as_millis() as u64;
                    }
                    debug!(attempt = n, latency_ms = resp.latency_ms, "completion ok");
                    return Ok(resp);
                }
                Err(e) if e.is_transient() && n < attempts => {
                    let wait = self.policy.delay(n, &e);
                    warn!(attempt = n, error = %e, wait_ms = wait.as_millis() as u64, "transient failure, retrying");
                    thread::sleep(wait);
                    n += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Backend selected by `COMET_LLM_BACKEND`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Http,
    Mock,
}

impl BackendKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "http" => Some(BackendKind::Http),
            "mock" => Some(BackendKind::Mock),
            _ => None,
        }
    }

    /// Defaults to the mock when unset.
    pub fn from_env() -> Result<Self, LlmError> {
        match std::env::var(ENV_BACKEND) {
            Ok(v) => BackendKind::parse(&v).ok_or_else(|| LlmError::Config(format!("{ENV_BACKEND}={v:?}"))),
            Err(_) => Ok(BackendKind::Mock),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
        err: LlmError,
    }

    impl LmmBackend for Flaky {
        fn complete(&self, _req: &LmmRequest) -> Result<LmmResponse, LlmError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.err.clone())
            } else {
                Ok(LmmResponse { text: "ok".into(), model_id: "m".into(), latency_ms: 1 })
            }
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy { attempts: 3, base_delay: Duration::from_millis(1), max_delay: Duration::from_millis(20) }
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let b = Arc::new(Flaky { calls: AtomicUsize::new(0), fail_first: 2, err: LlmError::Unavailable("503".into()) });
        let c = LmmClient::new(b.clone()).with_policy(fast());
        assert_eq!(c.complete(&LmmRequest::new("s", "u")).unwrap().text, "ok");
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let b = Arc::new(Flaky { calls: AtomicUsize::new(0), fail_first: 10, err: LlmError::Timeout("x".into()) });
        let c = LmmClient::new(b.clone()).with_policy(fast());
        assert!(matches!(c.complete(&LmmRequest::new("s", "u")), Err(LlmError::Timeout(_))));
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let b =
            Arc::new(Flaky { calls: AtomicUsize::new(0), fail_first: 10, err: LlmError::AuthFailure("401".into()) });
        let c = LmmClient::new(b.clone()).with_policy(fast());
        assert!(matches!(c.complete(&LmmRequest::new("s", "u")), Err(LlmError::AuthFailure(_))));
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let t = LlmError::Timeout(String::new());
        assert_eq!(p.delay(1, &t), Duration::from_secs(1));
        assert_eq!(p.delay(2, &t), Duration::from_secs(2));
        assert_eq!(p.delay(3, &LlmError::RateLimited { retry_after_s: Some(7.0) }), Duration::from_secs(7));
        assert_eq!(p.delay(1, &LlmError::RateLimited { retry_after_s: Some(99.0) }), Duration::from_secs(30));
    }

    #[test]
    fn empty_messages_rejected() {
        let c =
            LmmClient::new(Flaky { calls: AtomicUsize::new(0), fail_first: 0, err: LlmError::Timeout(String::new()) });
        assert!(matches!(c.complete(&LmmRequest::new(" ", "u")), Err(LlmError::Config(_))));
    }

    #[test]
    fn in_flight_cap_is_respected() {
        struct Slow {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl LmmBackend for Slow {
            fn complete(&self, _req: &LmmRequest) -> Result<LmmResponse, LlmError> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                thread::sleep(Duration::from_millis(15));
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(LmmResponse { text: String::new(), model_id: String::new(), latency_ms: 1 })
            }
        }
        let b = Arc::new(Slow { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let c = LmmClient::new(b.clone());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let c = c.clone();
                thread::spawn(move || c.complete(&LmmRequest::new("s", "u")).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(b.peak.load(Ordering::SeqCst), DEFAULT_IN_FLIGHT_CAP);
    }
}
