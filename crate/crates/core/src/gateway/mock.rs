use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{extract_envelope, Embedding, Gateway, GatewayError, PromptRequest, KEY_MEDICAL_ANSWER, KEY_TRANSLATED, KEY_UPDATED};

pub const DEFAULT_MOCK_DIMENSION: usize = 256;

/// The part of a user prompt the mock keys on: everything before the first
/// blank line, trimmed. Instructions appended after a blank line therefore
/// do not change which canned reply is found.
pub fn prompt_subject(user_text: &str) -> &str {
    user_text.split("\n\n").next().unwrap_or("").trim()
}

/// Lookup key for canned replies: SHA-256 over envelope key and subject.
pub fn prompt_key(envelope_key: &str, user_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(envelope_key.as_bytes());
    h.update([0x1f]);
    h.update(prompt_subject(user_text).as_bytes());
    hex::encode(h.finalize())
}

/// Readable canned reply. It answers any prompt whose subject equals
/// `prompt` or starts with it; the longest matching prompt wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CannedReply {
    pub key: String,
    pub prompt: String,
    pub reply: String,
}

/// On-disk mock fixture: `{prompt-hash -> raw provider reply}` plus seed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockFixture {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub replies: HashMap<String, String>,
    #[serde(default)]
    pub canned: Vec<CannedReply>,
}

impl MockFixture {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Deterministic offline gateway.
///
/// Raw replies are matched by [`prompt_key`], fixture entries by subject
/// prefix. Unmatched translation and grammar prompts echo their input;
/// unmatched answer prompts produce a short reply built from the first
/// quoted context block.
pub struct MockGateway {
    seed: u64,
    dimension: usize,
    replies: HashMap<String, String>,
    prefixes: Vec<(String, String, String)>,
    healthy: AtomicBool,
}

impl MockGateway {
    pub fn new(seed: u64, dimension: usize) -> Self {
        MockGateway {
            seed,
            dimension: dimension.max(1),
            replies: HashMap::new(),
            prefixes: Vec::new(),
            healthy: AtomicBool::new(true),
        }
    }

    pub fn from_fixture(fixture: &MockFixture) -> Self {
        let mut m = MockGateway::new(fixture.seed, fixture.dimension.unwrap_or(DEFAULT_MOCK_DIMENSION));
        m.replies.extend(fixture.replies.iter().map(|(k, v)| (k.clone(), v.clone())));
        for c in &fixture.canned {
            m.insert_prefix(&c.key, &c.prompt, &c.reply);
        }
        m
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Registers a raw provider reply (not necessarily well-formed).
    pub fn insert_raw(&mut self, envelope_key: &str, user_text: &str, raw_reply: impl Into<String>) {
        self.replies.insert(prompt_key(envelope_key, user_text), raw_reply.into());
    }

    /// Registers a reply whose envelope carries `value`.
    pub fn insert_value(&mut self, envelope_key: &str, user_text: &str, value: &str) {
        let raw = serde_json::json!({ envelope_key: value }).to_string();
        self.insert_raw(envelope_key, user_text, raw);
    }

    /// Registers a reply for every prompt whose subject starts with
    /// `subject_prefix`.
    pub fn insert_prefix(&mut self, envelope_key: &str, subject_prefix: &str, value: &str) {
        let prefix = prompt_subject(subject_prefix).to_string();
        let raw = serde_json::json!({ envelope_key: value }).to_string();
        self.prefixes.retain(|(k, p, _)| !(k == envelope_key && *p == prefix));
        self.prefixes.push((envelope_key.to_string(), prefix, raw));
    }

    fn prefix_reply(&self, envelope_key: &str, subject: &str) -> Option<&str> {
        self.prefixes
            .iter()
            .filter(|(k, p, _)| k == envelope_key && !p.is_empty() && subject.starts_with(p.as_str()))
            .max_by_key(|(_, p, _)| p.len())
            .map(|(_, _, r)| r.as_str())
    }

    pub fn set_healthy(&self, healthy: bool) {
        self.healthy.store(healthy, Ordering::SeqCst);
    }

    fn bucket(&self, token: &str) -> usize {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let digest = h.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(b) % self.dimension as u64) as usize
    }

    fn fallback_reply(&self, req: &PromptRequest) -> String {
        let key = req.expected_envelope_key.as_str();
        let value = match key {
            KEY_TRANSLATED | KEY_UPDATED => prompt_subject(&req.user_text).to_string(),
            KEY_MEDICAL_ANSWER => generic_answer(&req.system_text),
            _ => return "{}".to_string(),
        };
        serde_json::json!({ key: value }).to_string()
    }
}

fn generic_answer(system_text: &str) -> String {
    let context = system_text
        .split("\"\"\"")
        .nth(1)
        .map(str::trim)
        .filter(|c| !c.is_empty());
    match context {
        Some(c) => format!(
            "Thank you for your question. {} Please consult a doctor with Telehealth for advice about your own situation.",
            first_sentence(c)
        ),
        None => "Thank you for your question. I do not have verified information on this yet. \
                 Please consult a doctor with Telehealth who can guide you."
            .to_string(),
    }
}

fn first_sentence(text: &str) -> &str {
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'?' | b'!') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace()) {
            return &text[..=i];
        }
    }
    text
}

/// Splits into lowercase tokens on anything that is not alphanumeric.
pub(crate) fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl Gateway for MockGateway {
    fn complete(&self, req: &PromptRequest) -> Result<String, GatewayError> {
        req.validate()?;
        if !self.healthy.load(Ordering::SeqCst) {
            return Err(GatewayError::Unavailable("mock marked unhealthy".into()));
        }
        let key = prompt_key(&req.expected_envelope_key, &req.user_text);
        let raw = match self.replies.get(&key) {
            Some(r) => r.clone(),
            None => match self.prefix_reply(&req.expected_envelope_key, prompt_subject(&req.user_text)) {
                Some(r) => r.to_string(),
                None => self.fallback_reply(req),
            },
        };
        extract_envelope(&raw, &req.expected_envelope_key)
    }

    fn embed(&self, text: &str) -> Result<Embedding, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed empty text".into()));
        }
        let mut counts = vec![0.0f64; self.dimension];
        let mut any = false;
        for tok in tokenize(text) {
            counts[self.bucket(&tok)] += 1.0;
            any = true;
        }
        if !any {
            counts[self.bucket(text.trim())] += 1.0;
        }
        Embedding::normalized(counts)
    }

    fn health(&self) -> Result<(), GatewayError> {
        if self.healthy.load(Ordering::SeqCst) {
            Ok(())
        } else {
            Err(GatewayError::Unavailable("mock marked unhealthy".into()))
        }
    }
}
