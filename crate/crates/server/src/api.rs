//! Routes and handlers.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono_tz::Tz;
use saathi_core::pipeline::{Engine, PipelineError};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tower_http::services::ServeDir;

use crate::config::ServerConfig;
use crate::feedback::Feedback;
use crate::report::analytics_bundle;
use crate::sessions::SessionTable;
use crate::store::{StoreError, Stores};
use crate::tts::{PronunciationList, SpeechRequest, Synthesizer};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("missing or invalid admin token")]
    Unauthorized,
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    BadGateway(String),
    #[error("text-to-speech is not available in this build")]
    TtsUnavailable,
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::BadGateway(_) => StatusCode::BAD_GATEWAY,
            ApiError::TtsUnavailable => StatusCode::NOT_IMPLEMENTED,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::warn!(error = %self, %status, "request failed");
        }
        let body = match self {
            ApiError::TtsUnavailable => json!({ "error": self.to_string(), "tts": false }),
            _ => json!({ "error": self.to_string() }),
        };
        (status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        ApiError::Internal(format!("worker task failed: {e}"))
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub sessions: Arc<SessionTable>,
    pub stores: Arc<Stores>,
    pub synthesizer: Option<Arc<dyn Synthesizer>>,
    pub pronunciations: Arc<PronunciationList>,
    pub admin_token: Option<String>,
    pub zone: Tz,
}

impl AppState {
    pub fn new(engine: Engine, cfg: &ServerConfig) -> Result<Self, StoreError> {
        Ok(AppState {
            engine: Arc::new(engine),
            sessions: Arc::new(SessionTable::new(cfg.session_ttl)),
            stores: Arc::new(Stores::open(&cfg.data_dir)?),
            synthesizer: None,
            pronunciations: Arc::new(PronunciationList::shipped()),
            admin_token: cfg.admin_token.clone(),
            zone: cfg.zone,
        })
    }

    pub fn with_synthesizer(mut self, synthesizer: Arc<dyn Synthesizer>) -> Self {
        self.synthesizer = Some(synthesizer);
        self
    }
}

pub fn router(state: AppState, cfg: &ServerConfig) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/message", post(post_message))
        .route("/feedback", post(post_feedback))
        .route("/tts", get(tts))
        .route("/capabilities", get(capabilities))
        .route("/admin/analytics", get(admin_analytics))
        .nest_service("/app", ServeDir::new(&cfg.ui_dir))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub conversation_id: String,
    pub greeting: String,
    pub suggested_questions: Vec<String>,
}

async fn create_session(State(st): State<AppState>) -> Result<Json<SessionCreated>, ApiError> {
    let engine = st.engine.clone();
    let health = tokio::task::spawn_blocking(move || engine.gateway().health()).await?;
    if let Err(e) = health {
        return Err(ApiError::Unavailable(format!("language model unavailable: {e}")));
    }
    let (state, greeting) = st.engine.open_conversation();
    let conversation_id = state.conversation_id.as_str().to_string();
    st.sessions.insert(state);
    Ok(Json(SessionCreated {
        conversation_id,
        greeting: greeting.text,
        suggested_questions: greeting.suggested_questions,
    }))
}

#[derive(Debug, Deserialize)]
pub struct MessageBody {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageReply {
    pub response_text: String,
    pub message_id: String,
    pub trace_id: String,
}

async fn post_message(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> Result<Json<MessageReply>, ApiError> {
    let session = st.sessions.get(&id).ok_or_else(|| ApiError::NotFound(format!("no session {id:?}")))?;
    if body.text.trim().is_empty() {
        return Err(ApiError::Unprocessable("text must not be empty".into()));
    }
    let mut guard = session.state.clone().lock_owned().await;
    let engine = st.engine.clone();
    let stores = st.stores.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = engine.run_turn(&mut guard, &body.text).map_err(|e| match e {
            PipelineError::EmptyQuery => ApiError::Unprocessable(e.to_string()),
            PipelineError::Gateway(_) => ApiError::BadGateway(e.to_string()),
            PipelineError::Retrieval(_) => ApiError::Internal(e.to_string()),
        })?;
        stores.persist_turn(&outcome.log, &outcome.trace)?;
        Ok(Json(MessageReply {
            response_text: outcome.log.response_text.clone(),
            message_id: outcome.log.message_id.as_str().to_string(),
            trace_id: outcome.trace.trace_id.as_str().to_string(),
        }))
    })
    .await?
}

async fn post_feedback(State(st): State<AppState>, Json(fb): Json<Feedback>) -> Result<StatusCode, ApiError> {
    fb.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    match st.stores.message(&fb.message_id) {
        Some(m) if m.conversation_id == fb.conversation_id => {}
        _ => return Err(ApiError::NotFound(format!("no message {:?} in conversation {:?}", fb.message_id, fb.conversation_id))),
    }
    st.stores.append_feedback(&fb)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct TtsQuery {
    pub message_id: String,
}

async fn tts(State(st): State<AppState>, Query(q): Query<TtsQuery>) -> Result<Response, ApiError> {
    let msg = st.stores.message(&q.message_id).ok_or_else(|| ApiError::NotFound(format!("no message {:?}", q.message_id)))?;
    let synth = st.synthesizer.clone().ok_or(ApiError::TtsUnavailable)?;
    let request = SpeechRequest {
        overrides: st.pronunciations.overrides_for(&msg.response_text),
        text: msg.response_text,
        language: msg.language.as_str().to_string(),
    };
    let audio = tokio::task::spawn_blocking(move || synth.synthesize(&request))
        .await?
        .map_err(|e| ApiError::BadGateway(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, audio.content_type)], audio.bytes).into_response())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Capabilities {
    pub tts: bool,
    pub voice_input: bool,
}

async fn capabilities(State(st): State<AppState>) -> Json<Capabilities> {
    Json(Capabilities { tts: st.synthesizer.is_some(), voice_input: false })
}

fn authorized(headers: &HeaderMap, token: Option<&str>) -> bool {
    let Some(token) = token else { return false };
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|given| given == token)
}

/// The four report files keyed by file name.
async fn admin_analytics(State(st): State<AppState>, headers: HeaderMap) -> Result<Json<BTreeMap<String, String>>, ApiError> {
    if !authorized(&headers, st.admin_token.as_deref()) {
        return Err(ApiError::Unauthorized);
    }
    let stores = st.stores.clone();
    let zone = st.zone;
    let files = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let logs = stores.read_logs()?;
        analytics_bundle(logs, zone).map_err(|e| ApiError::Internal(e.to_string()))
    })
    .await??;
    Ok(Json(files))
}
