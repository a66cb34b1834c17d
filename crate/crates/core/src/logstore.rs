//! Append-only JSON-lines persistence for message logs.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::model::{ConversationId, MessageId, MessageLog};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("duplicate message {message_id} in conversation {conversation_id}")]
    Duplicate {
        conversation_id: ConversationId,
        message_id: MessageId,
    },
    #[error("invalid log record: {0}")]
    Invalid(String),
    #[error("timestamp goes backwards in conversation {0}")]
    NonMonotonic(ConversationId),
    #[error("malformed log line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Default)]
struct Index {
    keys: HashSet<(ConversationId, MessageId)>,
    last_ts: HashMap<ConversationId, DateTime<Utc>>,
}

impl Index {
    fn check(&self, log: &MessageLog) -> Result<(), LogError> {
        log.validate().map_err(LogError::Invalid)?;
        if self
            .keys
            .contains(&(log.conversation_id.clone(), log.message_id.clone()))
        {
            return Err(LogError::Duplicate {
                conversation_id: log.conversation_id.clone(),
                message_id: log.message_id.clone(),
            });
        }
        if let Some(prev) = self.last_ts.get(&log.conversation_id) {
            if log.timestamp < *prev {
                return Err(LogError::NonMonotonic(log.conversation_id.clone()));
            }
        }
        Ok(())
    }

    fn record(&mut self, log: &MessageLog) {
        self.keys
            .insert((log.conversation_id.clone(), log.message_id.clone()));
        self.last_ts
            .insert(log.conversation_id.clone(), log.timestamp);
    }
}

struct Inner {
    file: File,
    index: Index,
}

/// Line-delimited JSON log file, one [`MessageLog`] per line.
///
/// Appends from different conversations may race freely; the store
/// serializes the actual writes.
pub struct LogStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl LogStore {
    /// Opens (creating if needed) a log file and indexes its existing records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let mut index = Index::default();
        if path.exists() {
            for log in read_logs(&path)? {
                index.record(&log);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(LogStore {
            path,
            inner: Mutex::new(Inner { file, index }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, log: &MessageLog) -> Result<(), LogError> {
        let mut inner = self.inner.lock().expect("log store poisoned");
        inner.index.check(log)?;
        let mut line = serde_json::to_string(log).map_err(|e| LogError::Invalid(e.to_string()))?;
        line.push('\n');
        inner.file.write_all(line.as_bytes())?;
        inner.file.flush()?;
        inner.index.record(log);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("log store poisoned").index.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read_all(&self) -> Result<Vec<MessageLog>, LogError> {
        let _guard = self.inner.lock().expect("log store poisoned");
        read_logs(&self.path)
    }
}

/// Reads every record of a JSON-lines log file. Blank lines are skipped.
pub fn read_logs(path: impl AsRef<Path>) -> Result<Vec<MessageLog>, LogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let log = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?;
        out.push(log);
    }
    Ok(out)
}

/// Appends arbitrary serializable records (traces, feedback) as JSON lines.
pub struct JsonLines {
    file: Mutex<File>,
}

impl JsonLines {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JsonLines { file: Mutex::new(file) })
    }

    pub fn append<T: serde::Serialize>(&self, record: &T) -> std::io::Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = self.file.lock().expect("jsonl poisoned");
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Language;
    use chrono::{Duration, TimeZone};

    fn sample(conv: &str, msg: &str, offset_min: i64) -> MessageLog {
        MessageLog {
            conversation_id: conv.into(),
            message_id: msg.into(),
            timestamp: Utc.with_ymd_and_hms(2024, 2, 10, 6, 0, 0).unwrap() + Duration::minutes(offset_min),
            language: Language::Hinglish.into(),
            user_text: "Copper-T kitne saal chalta hai?".into(),
            response_text: "Copper-T 5 se 10 saal tak kaam karta hai.".into(),
            topic: None,
            question_type: None,
        }
    }

    #[test]
    fn append_then_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let store = LogStore::open(dir.path().join("logs.jsonl")).unwrap();
        store.append(&sample("a", "1", 0)).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.read_all().unwrap(), vec![sample("a", "1", 0)]);
    }

    #[test]
    fn duplicate_message_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = LogStore::open(dir.path().join("logs.jsonl")).unwrap();
        store.append(&sample("a", "1", 0)).unwrap();
        assert!(matches!(store.append(&sample("a", "1", 1)), Err(LogError::Duplicate { .. })));
        // same message id in another conversation is fine
        store.append(&sample("b", "1", 1)).unwrap();
    }

    #[test]
    fn invariant_violations_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = LogStore::open(dir.path().join("logs.jsonl")).unwrap();
        let mut blank = sample("a", "1", 0);
        blank.user_text = "  \n ".into();
        assert!(matches!(store.append(&blank), Err(LogError::Invalid(_))));
        store.append(&sample("a", "2", 10)).unwrap();
        assert!(matches!(store.append(&sample("a", "3", 5)), Err(LogError::NonMonotonic(_))));
    }

    #[test]
    fn reopen_keeps_duplicate_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("logs.jsonl");
        LogStore::open(&path).unwrap().append(&sample("a", "1", 0)).unwrap();
        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        assert!(store.append(&sample("a", "1", 3)).is_err());
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, format!("{}\n{{oops\n", serde_json::to_string(&sample("a", "1", 0)).unwrap())).unwrap();
        match read_logs(&path) {
            Err(LogError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
