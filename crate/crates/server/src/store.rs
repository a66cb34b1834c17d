//! Durable records under the data directory: message logs, pipeline
//! traces and feedback, one JSON object per line.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use saathi_core::logstore::{JsonLines, LogError, LogStore};
use saathi_core::model::{Label, Language, MessageLog, PipelineTrace};
use thiserror::Error;

use crate::feedback::Feedback;

pub const LOG_FILE: &str = "logs.jsonl";
pub const TRACE_FILE: &str = "traces.jsonl";
pub const FEEDBACK_FILE: &str = "feedback.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// What the service needs to know about a delivered message.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    pub conversation_id: String,
    pub response_text: String,
    pub language: Label<Language>,
}

pub struct Stores {
    dir: PathBuf,
    logs: LogStore,
    traces: JsonLines,
    feedback: JsonLines,
    messages: RwLock<HashMap<String, MessageRecord>>,
}

fn record(log: &MessageLog) -> (String, MessageRecord) {
    (
        log.message_id.as_str().to_string(),
        MessageRecord {
            conversation_id: log.conversation_id.as_str().to_string(),
            response_text: log.response_text.clone(),
            language: log.language.clone(),
        },
    )
}

impl Stores {
    /// Opens or creates the three files and indexes messages already logged.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.clone(), source })?;
        let logs = LogStore::open(dir.join(LOG_FILE))?;
        let jsonl = |name: &str| {
            let path = dir.join(name);
            JsonLines::open(&path).map_err(|source| StoreError::Io { path, source })
        };
        let messages = logs.read_all()?.iter().map(record).collect();
        Ok(Stores {
            traces: jsonl(TRACE_FILE)?,
            feedback: jsonl(FEEDBACK_FILE)?,
            logs,
            messages: RwLock::new(messages),
            dir,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends the log, then its trace, then makes the message visible.
    pub fn persist_turn(&self, log: &MessageLog, trace: &PipelineTrace) -> Result<(), StoreError> {
        self.logs.append(log)?;
        self.traces.append(trace).map_err(|source| StoreError::Io { path: self.dir.join(TRACE_FILE), source })?;
        let (id, rec) = record(log);
        self.messages.write().expect("message index poisoned").insert(id, rec);
        Ok(())
    }

    pub fn append_feedback(&self, fb: &Feedback) -> Result<(), StoreError> {
        self.feedback.append(fb).map_err(|source| StoreError::Io { path: self.dir.join(FEEDBACK_FILE), source })
    }

    pub fn message(&self, message_id: &str) -> Option<MessageRecord> {
        self.messages.read().expect("message index poisoned").get(message_id).cloned()
    }

    pub fn read_logs(&self) -> Result<Vec<MessageLog>, StoreError> {
        Ok(self.logs.read_all()?)
    }
}
