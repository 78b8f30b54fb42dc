use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{LlmError, LmmBackend, LmmRequest, LmmResponse, ENV_ENDPOINT, ENV_KEY, ENV_MODEL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
}

impl HttpConfig {
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        Ok(HttpConfig {
            endpoint,
            api_key: std::env::var(ENV_KEY).ok().filter(|k| !k.is_empty()),
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_string()),
        })
    }
}

/// Chat-completion client over blocking HTTP.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: HttpConfig,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        HttpBackend { config }
    }

    pub fn from_env() -> Result<Self, LlmError> {
        HttpConfig::from_env().map(HttpBackend::new)
    }

    pub fn request_body(&self, req: &LmmRequest) -> Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_units,
        })
    }
}

fn map_transport(e: ureq::Error) -> LlmError {
    match e {
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed
        | ureq::Error::BodyStalled => LlmError::Timeout(e.to_string()),
        ureq::Error::BadUri(_) | ureq::Error::RequireHttpsOnly(_) => LlmError::Config(e.to_string()),
        other => LlmError::Malformed(other.to_string()),
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion body.
pub(crate) fn parse_completion(body: &str, fallback_model: &str) -> Result<(String, String), LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))?;
    let model = v.get("model").and_then(Value::as_str).unwrap_or(fallback_model);
    Ok((text.to_string(), model.to_string()))
}

impl LmmBackend for HttpBackend {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(req.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let started = Instant::now();
        let mut call = agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call.send_json(self.request_body(req)).map_err(map_transport)?;
        let status = resp.status().as_u16();
        let retry_after =
            resp.headers().get("retry-after").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse::<f64>().ok());
        let body = resp.body_mut().read_to_string().map_err(map_transport)?;
        match status {
            200..=299 => {
                let (text, model_id) = parse_completion(&body, &self.config.model)?;
                Ok(LmmResponse { text, model_id, latency_ms: started.elapsed().as_millis().max(1) as u64 })
            }
            401 | 403 => Err(LlmError::AuthFailure(format!("HTTP {status}"))),
            429 => Err(LlmError::RateLimited { retry_after_s: retry_after }),
            408 | 504 => Err(LlmError::Timeout(format!("HTTP {status}"))),
            500..=599 => Err(LlmError::Unavailable(format!("HTTP {status}"))),
            _ => Err(LlmError::Malformed(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_body() {
        let body = r#"{"model":"m-1","choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(parse_completion(body, "x").unwrap(), ("hi".to_string(), "m-1".to_string()));
        assert!(matches!(parse_completion("{}", "x"), Err(LlmError::Malformed(_))));
        assert!(matches!(parse_completion("not json", "x"), Err(LlmError::Malformed(_))));
    }

    #[test]
    fn request_shape() {
        let b = HttpBackend::new(HttpConfig { endpoint: "http://x".into(), api_key: None, model: "m".into() });
        let v = b.request_body(&LmmRequest::new("sys", "usr"));
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], "usr");
        assert_eq!(v["temperature"], 1.0);
    }
}
