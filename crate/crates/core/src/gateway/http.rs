use std::time::Duration;

use serde_json::{json, Value};

use super::{extract_envelope, Embedding, Gateway, GatewayError, Permits, PromptRequest, RetryPolicy, DEFAULT_TIMEOUT};

#[derive(Debug, Clone)]
pub struct HttpGatewayConfig {
    /// Base URL, e.g. `https://api.openai.com/v1`.
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub embedding_model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl HttpGatewayConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        HttpGatewayConfig {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            model: model.into(),
            embedding_model: "text-embedding-3-small".into(),
            timeout: DEFAULT_TIMEOUT,
            retry: RetryPolicy::default(),
            max_in_flight: 8,
        }
    }

    /// Reads `LLM_ENDPOINT`, `LLM_API_KEY`, `LLM_MODEL` (and optionally
    /// `LLM_EMBEDDING_MODEL`). Returns `None` when the endpoint is unset.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("LLM_ENDPOINT").ok()?;
        let api_key = std::env::var("LLM_API_KEY").unwrap_or_default();
        let model = std::env::var("LLM_MODEL").unwrap_or_else(|_| "gpt-4".into());
        let mut cfg = Self::new(endpoint, api_key, model);
        if let Ok(m) = std::env::var("LLM_EMBEDDING_MODEL") {
            cfg.embedding_model = m;
        }
        Some(cfg)
    }
}

/// Chat-completion gateway for OpenAI-compatible HTTP endpoints.
pub struct HttpGateway {
    cfg: HttpGatewayConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl HttpGateway {
    pub fn new(cfg: HttpGatewayConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Permits::new(cfg.max_in_flight);
        HttpGateway { cfg, agent, permits }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.endpoint.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&self.url(path))
            .header("Authorization", &format!("Bearer {}", self.cfg.api_key))
            .send_json(body)
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| GatewayError::Unavailable(format!("unreadable reply: {e}"))),
            429 => Err(GatewayError::RateLimited),
            408 | 504 => Err(GatewayError::ProviderTimeout),
            _ => Err(GatewayError::Unavailable(format!("HTTP {status}"))),
        }
    }
}

fn map_transport(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::Timeout(_) => GatewayError::ProviderTimeout,
        other => GatewayError::Unavailable(other.to_string()),
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, req: &PromptRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let body = json!({
            "model": self.cfg.model,
            "temperature": req.temperature,
            "response_format": { "type": "json_object" },
            "messages": [
                { "role": "system", "content": format!(
                    "{}\n\nReply in JSON with the key \"{}\". Use at most {} words.",
                    req.system_text, req.expected_envelope_key, req.max_output_words) },
                { "role": "user", "content": req.user_text },
            ],
        });
        let reply = self.cfg.retry.run(|| self.post("chat/completions", &body))?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::MalformedEnvelope { key: req.expected_envelope_key.clone() })?;
        extract_envelope(content, &req.expected_envelope_key)
    }

    fn embed(&self, text: &str) -> Result<Embedding, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed empty text".into()));
        }
        let body = json!({ "model": self.cfg.embedding_model, "input": text });
        let reply = self.cfg.retry.run(|| self.post("embeddings", &body))?;
        let values: Vec<f64> = reply
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::Unavailable("embedding reply missing data".into()))?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        Embedding::normalized(values)
    }

    fn health(&self) -> Result<(), GatewayError> {
        let resp = self
            .agent
            .get(&self.url("models"))
            .header("Authorization", &format!("Bearer {}", self.cfg.api_key))
            .call()
            .map_err(map_transport)?;
        if resp.status().is_server_error() {
            return Err(GatewayError::Unavailable(format!("HTTP {}", resp.status())));
        }
        Ok(())
    }
}
