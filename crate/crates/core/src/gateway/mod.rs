//! Uniform interface to a text-generation / embedding provider.
//!
//! Every stage talks to a [`Gateway`]. [`MockGateway`] is a pure function of
//! its seed and inputs, so the whole pipeline can run offline;
//! [`HttpGateway`] speaks to an OpenAI-style chat-completion endpoint.

mod http;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpGateway, HttpGatewayConfig};
pub use mock::{prompt_key, prompt_subject, CannedReply, MockFixture, MockGateway, DEFAULT_MOCK_DIMENSION};
pub(crate) use mock::tokenize;

/// Envelope key carrying a translation (stage 1 and the return hop).
pub const KEY_TRANSLATED: &str = "translated_text";
/// Envelope key carrying the generated English answer.
pub const KEY_MEDICAL_ANSWER: &str = "medical_answer";
/// Envelope key carrying grammar-corrected text.
pub const KEY_UPDATED: &str = "updated_text";
/// Envelope key used by the taxonomy classifiers.
pub const KEY_CATEGORY: &str = "category";

pub const DEFAULT_TEMPERATURE: f64 = 0.3;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("provider reply has no `{key}` envelope")]
    MalformedEnvelope { key: String },
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("provider rate limited the request")]
    RateLimited,
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::ProviderTimeout | GatewayError::RateLimited)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system_text: String,
    pub user_text: String,
    pub expected_envelope_key: String,
    pub max_output_words: usize,
    pub temperature: f64,
}

impl PromptRequest {
    pub fn new(
        system_text: impl Into<String>,
        user_text: impl Into<String>,
        expected_envelope_key: &str,
        max_output_words: usize,
    ) -> Result<Self, GatewayError> {
        let req = PromptRequest {
            system_text: system_text.into(),
            user_text: user_text.into(),
            expected_envelope_key: expected_envelope_key.to_string(),
            max_output_words,
            temperature: DEFAULT_TEMPERATURE,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.expected_envelope_key.is_empty() {
            return Err(GatewayError::InvalidRequest("empty envelope key".into()));
        }
        if self.user_text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty user text".into()));
        }
        if self.max_output_words == 0 {
            return Err(GatewayError::InvalidRequest("max_output_words must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest("temperature outside [0, 2]".into()));
        }
        Ok(())
    }

    /// The prompt as the provider sees it: system part, then user part.
    pub fn full_text(&self) -> String {
        format!("{}\n\n{}", self.system_text, self.user_text)
    }
}

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    /// Normalizes `values` to unit L2 norm. Rejects non-finite or all-zero input.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self, GatewayError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GatewayError::InvalidRequest("non-finite embedding component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(GatewayError::InvalidRequest("zero embedding".into()));
        }
        for v in &mut values {
            *v /= norm;
        }
        Ok(Embedding { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub trait Gateway: Send + Sync {
    /// Sends the prompt and returns the value under its envelope key.
    fn complete(&self, req: &PromptRequest) -> Result<String, GatewayError>;

    fn embed(&self, text: &str) -> Result<Embedding, GatewayError>;

    fn health(&self) -> Result<(), GatewayError> {
        Ok(())
    }
}

/// Pulls `key` out of a structured provider reply.
///
/// Providers sometimes wrap the JSON object in prose or code fences; only the
/// outermost `{...}` is parsed. Keys are matched exactly, or with spaces in
/// place of underscores.
pub fn extract_envelope(reply: &str, key: &str) -> Result<String, GatewayError> {
    let malformed = || GatewayError::MalformedEnvelope { key: key.to_string() };
    let start = reply.find('{').ok_or_else(malformed)?;
    let end = reply.rfind('}').ok_or_else(malformed)?;
    if end < start {
        return Err(malformed());
    }
    let value: serde_json::Value = serde_json::from_str(&reply[start..=end]).map_err(|_| malformed())?;
    let obj = value.as_object().ok_or_else(malformed)?;
    let spaced = key.replace('_', " ");
    let found = obj.get(key).or_else(|| obj.get(&spaced)).ok_or_else(malformed)?;
    match found {
        serde_json::Value::String(s) => Ok(s.clone()),
        _ => Err(malformed()),
    }
}

/// Exponential backoff for transient provider failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(250),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delays slept between consecutive attempts (`attempts - 1` of them).
    pub fn delays(&self) -> Vec<Duration> {
        (0..self.attempts.saturating_sub(1))
            .map(|i| self.base_delay * self.factor.pow(i))
            .collect()
    }

    /// Runs `op`, retrying transient errors. Non-transient errors return at once.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, GatewayError>) -> Result<T, GatewayError> {
        let delays = self.delays();
        let mut attempt = 0usize;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < delays.len() => {
                    tracing::warn!(error = %e, attempt, "transient provider failure, backing off");
                    std::thread::sleep(delays[attempt]);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Counting semaphore bounding in-flight provider requests.
pub(crate) struct Permits {
    available: std::sync::Mutex<usize>,
    cv: std::sync::Condvar,
}

impl Permits {
    pub(crate) fn new(n: usize) -> Self {
        Permits {
            available: std::sync::Mutex::new(n.max(1)),
            cv: std::sync::Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> PermitGuard<'_> {
        let mut n = self.available.lock().expect("permits poisoned");
        while *n == 0 {
            n = self.cv.wait(n).expect("permits poisoned");
        }
        *n -= 1;
        PermitGuard(self)
    }
}

pub(crate) struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("permits poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Routes to `primary`, switching to `fallback` when the primary fails its
/// health check.
pub struct FallbackGateway {
    primary: std::sync::Arc<dyn Gateway>,
    fallback: Option<std::sync::Arc<dyn Gateway>>,
}

impl FallbackGateway {
    pub fn new(primary: std::sync::Arc<dyn Gateway>, fallback: Option<std::sync::Arc<dyn Gateway>>) -> Self {
        FallbackGateway { primary, fallback }
    }

    fn active(&self) -> Result<&dyn Gateway, GatewayError> {
        match self.primary.health() {
            Ok(()) => Ok(self.primary.as_ref()),
            Err(e) => match &self.fallback {
                Some(f) => {
                    tracing::warn!(error = %e, "primary gateway unhealthy, using fallback");
                    Ok(f.as_ref())
                }
                None => Err(e),
            },
        }
    }
}

impl Gateway for FallbackGateway {
    fn complete(&self, req: &PromptRequest) -> Result<String, GatewayError> {
        self.active()?.complete(req)
    }

    fn embed(&self, text: &str) -> Result<Embedding, GatewayError> {
        self.active()?.embed(text)
    }

    fn health(&self) -> Result<(), GatewayError> {
        self.active()?.health()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::cell::Cell;

    #[test]
    fn envelope_extraction() {
        assert_eq!(extract_envelope(r#"{"medical_answer":"Namaste"}"#, "medical_answer").unwrap(), "Namaste");
        let fenced = "Sure!\n```json\n{\"translated text\": \"What is a condom?\"}\n```";
        assert_eq!(extract_envelope(fenced, "translated_text").unwrap(), "What is a condom?");
        assert_eq!(
            extract_envelope(r#"{"answer":"x"}"#, "medical_answer"),
            Err(GatewayError::MalformedEnvelope { key: "medical_answer".into() })
        );
        assert!(extract_envelope("no json here", "updated_text").is_err());
        assert!(extract_envelope(r#"{"updated_text": 3}"#, "updated_text").is_err());
    }

    proptest! {
        #[test]
        fn envelope_returns_exactly_the_value(value in "[a-zA-Z0-9 ,.?!'\\-]{1,80}") {
            let reply = serde_json::json!({ "medical_answer": value.clone(), "meta": "wrapper" }).to_string();
            let out = extract_envelope(&format!("Here you go: {reply} -- end"), "medical_answer").unwrap();
            prop_assert!(!out.contains("medical_answer"));
            prop_assert_eq!(out, value);
        }
    }

    #[test]
    fn backoff_delays_strictly_increase() {
        let p = RetryPolicy::default();
        let d = p.delays();
        assert_eq!(d.len(), 2);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn retries_transient_then_gives_up() {
        let p = RetryPolicy { base_delay: Duration::from_millis(1), ..Default::default() };
        let calls = Cell::new(0);
        let r: Result<(), _> = p.run(|| {
            calls.set(calls.get() + 1);
            Err(GatewayError::RateLimited)
        });
        assert_eq!(r, Err(GatewayError::RateLimited));
        assert_eq!(calls.get(), 3);

        calls.set(0);
        let r = p.run(|| {
            calls.set(calls.get() + 1);
            if calls.get() < 3 { Err(GatewayError::ProviderTimeout) } else { Ok(7) }
        });
        assert_eq!(r, Ok(7));

        calls.set(0);
        let r: Result<(), _> = p.run(|| {
            calls.set(calls.get() + 1);
            Err(GatewayError::MalformedEnvelope { key: "k".into() })
        });
        assert!(r.is_err());
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn prompt_request_validation() {
        assert!(PromptRequest::new("s", "u", "", 10).is_err());
        assert!(PromptRequest::new("s", "  ", "k", 10).is_err());
        assert!(PromptRequest::new("s", "u", "k", 0).is_err());
        let mut r = PromptRequest::new("s", "u", "k", 10).unwrap();
        r.temperature = 2.5;
        assert!(r.validate().is_err());
    }

    #[test]
    fn fallback_used_when_primary_unhealthy() {
        let primary = std::sync::Arc::new(MockGateway::new(1, 16));
        primary.set_healthy(false);
        let fb = FallbackGateway::new(primary.clone(), None);
        assert!(fb.health().is_err());
        let fb = FallbackGateway::new(primary, Some(std::sync::Arc::new(MockGateway::new(1, 16))));
        assert!(fb.health().is_ok());
        assert!(fb.embed("condom").is_ok());
    }
}
