//! Spawns the service on an ephemeral port for black-box tests.

#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::time::Duration;

use saathi_core::gateway::{Embedding, Gateway, GatewayError, MockGateway, PromptRequest};
use saathi_core::stack::{build_engine_with_gateway, shipped_mock, StackConfig};
use saathi_server::tts::{Audio, SpeechRequest, Synthesizer, TtsError};
use saathi_server::{router, AppState, ServerConfig};
use serde_json::{json, Value};

pub const ADMIN_TOKEN: &str = "test-admin-token";

pub struct TestServer {
    pub base: String,
    pub client: reqwest::Client,
    pub dir: tempfile::TempDir,
}

pub struct Options {
    pub gateway: Arc<dyn Gateway>,
    pub synthesizer: Option<Arc<dyn Synthesizer>>,
}

impl Default for Options {
    fn default() -> Self {
        Options { gateway: Arc::new(shipped_mock()), synthesizer: None }
    }
}

pub async fn spawn(opts: Options) -> TestServer {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ServerConfig::new(dir.path().join("data"));
    cfg.admin_token = Some(ADMIN_TOKEN.into());
    let engine = build_engine_with_gateway(&StackConfig::mock(), opts.gateway).unwrap();
    let mut state = AppState::new(engine, &cfg).unwrap();
    if let Some(s) = opts.synthesizer {
        state = state.with_synthesizer(s);
    }
    let app = router(state, &cfg);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    TestServer { base: format!("http://{addr}"), client: reqwest::Client::new(), dir }
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn data(&self, file: &str) -> std::path::PathBuf {
        self.dir.path().join("data").join(file)
    }

    pub async fn open(&self) -> Value {
        let r = self.client.post(self.url("/session")).send().await.unwrap();
        assert_eq!(r.status(), 200);
        r.json().await.unwrap()
    }

    pub async fn send(&self, conversation_id: &str, text: &str) -> reqwest::Response {
        self.client
            .post(self.url(&format!("/session/{conversation_id}/message")))
            .json(&json!({ "text": text }))
            .send()
            .await
            .unwrap()
    }

    pub fn jsonl(&self, file: &str) -> Vec<Value> {
        std::fs::read_to_string(self.data(file))
            .unwrap_or_default()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }
}

/// Every call fails and the health check reports the provider down.
pub struct DownGateway;

impl Gateway for DownGateway {
    fn complete(&self, _: &PromptRequest) -> Result<String, GatewayError> {
        Err(GatewayError::Unavailable("down".into()))
    }
    fn embed(&self, _: &str) -> Result<Embedding, GatewayError> {
        Err(GatewayError::Unavailable("down".into()))
    }
    fn health(&self) -> Result<(), GatewayError> {
        Err(GatewayError::Unavailable("down".into()))
    }
}

/// Healthy and embeds, but every completion fails.
pub struct CompletionOutage(pub MockGateway);

impl Gateway for CompletionOutage {
    fn complete(&self, _: &PromptRequest) -> Result<String, GatewayError> {
        Err(GatewayError::Unavailable("completion endpoint down".into()))
    }
    fn embed(&self, text: &str) -> Result<Embedding, GatewayError> {
        self.0.embed(text)
    }
    fn health(&self) -> Result<(), GatewayError> {
        Ok(())
    }
}

/// The shipped mock with a fixed delay on every completion.
pub struct SlowGateway(pub MockGateway, pub Duration);

impl Gateway for SlowGateway {
    fn complete(&self, req: &PromptRequest) -> Result<String, GatewayError> {
        std::thread::sleep(self.1);
        self.0.complete(req)
    }
    fn embed(&self, text: &str) -> Result<Embedding, GatewayError> {
        self.0.embed(text)
    }
    fn health(&self) -> Result<(), GatewayError> {
        Ok(())
    }
}

/// Records requests and answers with a fixed byte payload.
#[derive(Default)]
pub struct CapturingSynth(pub Mutex<Vec<SpeechRequest>>);

impl Synthesizer for CapturingSynth {
    fn synthesize(&self, request: &SpeechRequest) -> Result<Audio, TtsError> {
        self.0.lock().unwrap().push(request.clone());
        Ok(Audio { content_type: "audio/wav".into(), bytes: b"RIFF".to_vec() })
    }
}

/// Localized answer recorded for `query` in the core golden snapshot.
pub fn golden_answer(query: &str) -> String {
    let snap = include_str!("../../../core/tests/data/golden_traces.jsonl");
    snap.lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .find(|t| t["raw_query"] == query)
        .map(|t| t["localized_answer"].as_str().unwrap().to_string())
        .unwrap()
}
