//! Text-to-speech hook. The default build ships no synthesizer; callers
//! can plug one in through [`Synthesizer`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PRONUNCIATIONS_TSV: &str = include_str!("../assets/pronunciations.tsv");

#[derive(Debug, Error)]
pub enum TtsError {
    #[error("pronunciation list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("synthesizer failed: {0}")]
    Synthesis(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronunciationOverride {
    pub word: String,
    pub phonetic: String,
}

/// Words a synthesizer is known to mispronounce or skip.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronunciationList {
    entries: Vec<PronunciationOverride>,
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl PronunciationList {
    /// `word<TAB>phonetic` per line; `#` starts a comment.
    pub fn parse_tsv(text: &str) -> Result<Self, TtsError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, phonetic) = line.split_once('\t').ok_or_else(|| TtsError::Parse {
                line: i + 1,
                message: "expected word<TAB>phonetic".into(),
            })?;
            if tokens(word).is_empty() || phonetic.trim().is_empty() {
                return Err(TtsError::Parse { line: i + 1, message: "empty field".into() });
            }
            entries.push(PronunciationOverride { word: word.trim().into(), phonetic: phonetic.trim().into() });
        }
        Ok(PronunciationList { entries })
    }

    pub fn shipped() -> Self {
        Self::parse_tsv(PRONUNCIATIONS_TSV).expect("shipped pronunciation list is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries whose word occurs in `text` as a whole-word, case-insensitive
    /// phrase, in list order.
    pub fn overrides_for(&self, text: &str) -> Vec<PronunciationOverride> {
        let words = tokens(text);
        self.entries
            .iter()
            .filter(|e| {
                let phrase = tokens(&e.word);
                words.windows(phrase.len()).any(|w| w == phrase.as_slice())
            })
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechRequest {
    pub text: String,
    pub language: String,
    pub overrides: Vec<PronunciationOverride>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub content_type: String,
    pub bytes: Vec<u8>,
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, request: &SpeechRequest) -> Result<Audio, TtsError>;
}
