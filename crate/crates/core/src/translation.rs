//! Language hops around the English core of the pipeline: grammar
//! normalization of the raw query, Hinglish → English with disambiguation
//! hints, and English → the user's language for the answer.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, PromptRequest, KEY_TRANSLATED, KEY_UPDATED};
use crate::model::Language;
use crate::text::{detect_language, devanagari_fraction, word_count};

const GRAMMAR_PROMPT: &str = "You refine the grammar and spelling of a user's message and ensure readability. \
Keep the same language and the same script as the message. Do not translate it and do not answer it.";

const TO_ENGLISH_PROMPT: &str = "Interpret the user's message, written in Hinglish (Hindi in Roman script, mixed \
with English), and translate it into clear English. Keep medical terms. Do not answer the question.";

const TO_USER_PROMPT: &str = "Translate the following English medical answer into Hinglish: Hindi written in Roman \
script, mixed with common English words. Address the user respectfully as 'aap'. Keep names of methods, medicines \
and services as they are.";

const RETRY_HINT: &str = "Return the corrected message with about the same number of words as the original.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranslationError {
    #[error("input text is empty")]
    Empty,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Error)]
pub enum HintError {
    #[error("hint table parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("hint `{0}` needs at least two glosses")]
    NotAmbiguous(String),
    #[error("hint table i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gloss {
    pub meaning_en: String,
    pub cue_words: Vec<String>,
}

/// A Hinglish stem with several meanings told apart by co-occurring cue
/// words. `surface_form` matches any token that starts with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisambiguationHint {
    pub surface_form: String,
    pub glosses: Vec<Gloss>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HintTable {
    pub hints: Vec<DisambiguationHint>,
}

impl HintTable {
    pub fn from_json(text: &str) -> Result<Self, HintError> {
        let table: HintTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HintError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HintError> {
        match self.hints.iter().find(|h| h.glosses.len() < 2) {
            Some(h) => Err(HintError::NotAmbiguous(h.surface_form.clone())),
            None => Ok(()),
        }
    }

    /// Glosses selected for `query`, formatted as `surface: meaning`.
    pub fn glosses_for(&self, query: &str) -> Vec<String> {
        let tokens: Vec<String> = crate::gateway::tokenize(query).collect();
        let mut out = Vec::new();
        for hint in &self.hints {
            let stem = hint.surface_form.to_lowercase();
            let Some(hit) = tokens.iter().find(|t| t.starts_with(&stem)) else {
                continue;
            };
            let best = hint
                .glosses
                .iter()
                .map(|g| (g, g.cue_words.iter().filter(|c| tokens.iter().any(|t| cue_matches(t, c))).count()))
                .fold(None::<(&Gloss, usize)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((gloss, hits)) = best {
                if hits > 0 {
                    out.push(format!("{hit}: {}", gloss.meaning_en));
                }
            }
        }
        out
    }
}

fn cue_matches(token: &str, cue: &str) -> bool {
    let cue = cue.to_lowercase();
    if cue.chars().count() >= 4 {
        token.starts_with(&cue)
    } else {
        token == cue
    }
}

/// Result of [`normalize_query`]; `note` is set when the model output was
/// discarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub note: Option<String>,
}

/// Folds blank lines so the text stays a single prompt block.
fn single_block(text: &str) -> String {
    text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()).collect::<Vec<_>>().join("\n")
}

fn is_devanagari_script(text: &str) -> bool {
    devanagari_fraction(text) > 0.20
}

fn acceptable(input: &str, output: &str) -> bool {
    let (a, b) = (word_count(input) as f64, word_count(output) as f64);
    !output.trim().is_empty() && (b - a).abs() <= 0.5 * a && is_devanagari_script(input) == is_devanagari_script(output)
}

/// Grammar and spelling correction in the query's own language.
pub fn normalize_query(gateway: &dyn Gateway, text: &str) -> Result<Normalized, TranslationError> {
    let input = single_block(text);
    if input.trim().is_empty() {
        return Err(TranslationError::Empty);
    }
    let cap = word_count(&input) * 2 + 10;
    let first = gateway.complete(&PromptRequest::new(GRAMMAR_PROMPT, input.clone(), KEY_UPDATED, cap)?)?;
    if acceptable(&input, &first) {
        return Ok(Normalized { text: first.trim().to_string(), note: None });
    }
    let retry = PromptRequest::new(GRAMMAR_PROMPT, format!("{input}\n\n{RETRY_HINT}"), KEY_UPDATED, cap)?;
    let second = gateway.complete(&retry)?;
    if acceptable(&input, &second) {
        return Ok(Normalized {
            text: second.trim().to_string(),
            note: Some("normalize: first correction out of bounds, retried".into()),
        });
    }
    Ok(Normalized {
        text: input,
        note: Some("normalize: correction rejected twice, query passed through".into()),
    })
}

/// Hinglish → English. English input is returned unchanged; matching
/// disambiguation glosses are appended in brackets.
pub fn to_english(gateway: &dyn Gateway, query: &str, hints: &HintTable) -> Result<String, TranslationError> {
    let query = single_block(query);
    if query.trim().is_empty() {
        return Err(TranslationError::Empty);
    }
    let english = if detect_language(&query) == Language::English {
        query.trim().to_string()
    } else {
        let cap = word_count(&query) * 3 + 20;
        gateway
            .complete(&PromptRequest::new(TO_ENGLISH_PROMPT, query.clone(), KEY_TRANSLATED, cap)?)?
            .trim()
            .to_string()
    };
    let glosses = hints.glosses_for(&query);
    if glosses.is_empty() {
        Ok(english)
    } else {
        Ok(format!("{english} [{}]", glosses.join("; ")))
    }
}

/// English → the user's language. Devanagari users get the Hinglish
/// rendering too.
pub fn to_user_language(gateway: &dyn Gateway, answer_en: &str, target: Language) -> Result<String, TranslationError> {
    if answer_en.trim().is_empty() {
        return Err(TranslationError::Empty);
    }
    if target == Language::English {
        return Ok(answer_en.to_string());
    }
    let body = single_block(answer_en);
    let cap = word_count(&body) * 2 + 20;
    let out = gateway.complete(&PromptRequest::new(TO_USER_PROMPT, body, KEY_TRANSLATED, cap)?)?;
    Ok(out.trim().to_string())
}
