//! Lexicon-driven localization of user-language answers.
//!
//! Word n-grams of the answer are compared against lexicon phrases with
//! normalized Levenshtein similarity over case-, diacritic- and
//! punctuation-folded forms. Longer phrases are matched first, then left
//! to right; a word that has been replaced is never looked at again.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_MIN_SIMILARITY: f64 = 0.8;
const MAX_PHRASE_WORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MedicalTerm,
    FormalRegister,
    Explicitness,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::MedicalTerm => "medical_term",
            Category::FormalRegister => "formal_register",
            Category::Explicitness => "explicitness",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "medical_term" => Ok(Category::MedicalTerm),
            "formal_register" => Ok(Category::FormalRegister),
            "explicitness" => Ok(Category::Explicitness),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate source phrase `{phrase}`")]
    Duplicate { line: usize, phrase: String },
    #[error("lexicon i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub source_phrase: String,
    /// Empty only for advisory-only explicitness entries.
    pub replacement: String,
    pub min_similarity: f64,
    pub category: Category,
}

impl LexiconEntry {
    pub fn new(source: &str, replacement: &str, category: Category) -> Self {
        LexiconEntry {
            source_phrase: source.to_string(),
            replacement: replacement.to_string(),
            min_similarity: DEFAULT_MIN_SIMILARITY,
            category,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = fold(&self.source_phrase).split(' ').filter(|w| !w.is_empty()).count();
        if n == 0 || n > MAX_PHRASE_WORDS {
            return Err(format!("source phrase must have 1 to {MAX_PHRASE_WORDS} words"));
        }
        if fold(&self.source_phrase) == fold(&self.replacement) {
            return Err("replacement equals source phrase".into());
        }
        if !(self.min_similarity > 0.0 && self.min_similarity <= 1.0) {
            return Err(format!("min_similarity {} outside (0, 1]", self.min_similarity));
        }
        if self.replacement.trim().is_empty() && self.category != Category::Explicitness {
            return Err("only explicitness entries may omit the replacement".into());
        }
        Ok(())
    }

    fn words(&self) -> usize {
        fold(&self.source_phrase).split(' ').count()
    }
}

/// Lowercase, strip diacritics and punctuation, collapse whitespace.
pub fn fold(s: &str) -> String {
    let stripped: String = s
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `1 - lev(a, b) / max(|a|, |b|)` over folded forms.
pub fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&fold(a), &fold(b))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        let mut seen = HashMap::new();
        for (i, e) in entries.into_iter().enumerate() {
            e.validate().map_err(|message| LexiconError::Parse { line: i + 1, message })?;
            if seen.insert(fold(&e.source_phrase), i).is_some() {
                return Err(LexiconError::Duplicate { line: i + 1, phrase: e.source_phrase });
            }
            lex.entries.push(e);
        }
        Ok(lex)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the TSV format: `source_phrase, replacement, min_similarity,
    /// category`, tab separated, `#` comments. The last two columns may be
    /// omitted.
    pub fn parse_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if cols[0] == "source_phrase" {
                continue;
            }
            if cols.len() < 2 || cols.len() > 4 {
                return Err(LexiconError::Parse { line, message: format!("expected 2 to 4 tab-separated columns, found {}", cols.len()) });
            }
            let min_similarity = match cols.get(2).filter(|c| !c.is_empty()) {
                Some(c) => c.parse::<f64>().map_err(|e| LexiconError::Parse { line, message: format!("min_similarity: {e}") })?,
                None => DEFAULT_MIN_SIMILARITY,
            };
            let category = match cols.get(3).filter(|c| !c.is_empty()) {
                Some(c) => c.parse::<Category>().map_err(|message| LexiconError::Parse { line, message })?,
                None => Category::MedicalTerm,
            };
            let entry = LexiconEntry {
                source_phrase: cols[0].to_string(),
                replacement: cols[1].to_string(),
                min_similarity,
                category,
            };
            entry.validate().map_err(|message| LexiconError::Parse { line, message })?;
            if seen.insert(fold(&entry.source_phrase), line).is_some() {
                return Err(LexiconError::Duplicate { line, phrase: entry.source_phrase });
            }
            entries.push(entry);
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# source_phrase\treplacement\tmin_similarity\tcategory\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", e.source_phrase, e.replacement, e.min_similarity, e.category));
        }
        out
    }

    /// Replacements that would themselves match some source phrase, which
    /// would make localization non-idempotent.
    pub fn idempotence_conflicts(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for e in self.entries.iter().filter(|e| !e.replacement.is_empty()) {
            for s in &self.entries {
                let sim = similarity(&e.replacement, &s.source_phrase);
                if sim >= s.min_similarity {
                    out.push((e.replacement.clone(), s.source_phrase.clone(), sim));
                }
            }
        }
        out
    }
}

/// Last-writer-wins merge on source phrase; new phrases are appended.
pub fn merge_lexicons(base: &Lexicon, pack: &Lexicon) -> Lexicon {
    let mut entries = base.entries.clone();
    for e in &pack.entries {
        let key = fold(&e.source_phrase);
        match entries.iter_mut().find(|b| fold(&b.source_phrase) == key) {
            Some(slot) => *slot = e.clone(),
            None => entries.push(e.clone()),
        }
    }
    Lexicon { entries }
}

/// One replaced span. Offsets are in characters of the input text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub start: usize,
    pub end: usize,
    pub matched_span: String,
    pub entry: LexiconEntry,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementReport {
    pub replacements: Vec<Replacement>,
    pub output_text: String,
}

/// Character range of a word with surrounding punctuation trimmed.
#[derive(Debug, Clone, Copy)]
struct WordSpan {
    start: usize,
    end: usize,
}

fn word_spans(chars: &[char]) -> Vec<WordSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let (mut s, mut e) = (run_start, i);
        while s < e && !chars[s].is_alphanumeric() {
            s += 1;
        }
        while e > s && !chars[e - 1].is_alphanumeric() {
            e -= 1;
        }
        if s < e {
            out.push(WordSpan { start: s, end: e });
        }
    }
    out
}

/// Finds lexicon matches. Words already spelling out one of `protected`
/// are never part of a match.
fn find_matches<'a>(text: &str, entries: impl Iterator<Item = &'a LexiconEntry>, protected: &[&str]) -> Vec<Replacement> {
    let chars: Vec<char> = text.chars().collect();
    let words = word_spans(&chars);
    let mut taken = vec![false; words.len()];
    for p in protected {
        let (n, target) = (p.split_whitespace().count(), fold(p));
        if n == 0 || n > words.len() || target.is_empty() {
            continue;
        }
        for i in 0..=words.len() - n {
            let span: String = chars[words[i].start..words[i + n - 1].end].iter().collect();
            if fold(&span) == target {
                taken[i..i + n].iter_mut().for_each(|t| *t = true);
            }
        }
    }
    let mut by_len: Vec<(usize, Vec<&LexiconEntry>)> = Vec::new();
    for e in entries {
        let n = e.words();
        match by_len.iter_mut().find(|(len, _)| *len == n) {
            Some((_, v)) => v.push(e),
            None => by_len.push((n, vec![e])),
        }
    }
    by_len.sort_by(|a, b| b.0.cmp(&a.0));

    let mut found = Vec::new();
    for (n, group) in by_len {
        if n > words.len() {
            continue;
        }
        for i in 0..=words.len() - n {
            if taken[i..i + n].iter().any(|&t| t) {
                continue;
            }
            let (start, end) = (words[i].start, words[i + n - 1].end);
            let span: String = chars[start..end].iter().collect();
            let folded = fold(&span);
            let mut best: Option<(&LexiconEntry, f64)> = None;
            for e in &group {
                let sim = strsim::normalized_levenshtein(&folded, &fold(&e.source_phrase));
                if sim >= e.min_similarity && best.is_none_or(|(_, b)| sim > b) {
                    best = Some((e, sim));
                }
            }
            if let Some((entry, similarity)) = best {
                taken[i..i + n].iter_mut().for_each(|t| *t = true);
                found.push(Replacement {
                    start,
                    end,
                    matched_span: span,
                    entry: entry.clone(),
                    similarity,
                });
            }
        }
    }
    found.sort_by_key(|r| r.start);
    found
}

fn inherit_case(original: &str, replacement: &str) -> String {
    let upper = original.chars().next().is_some_and(char::is_uppercase);
    let mut rc = replacement.chars();
    match rc.next() {
        Some(first) if upper => first.to_uppercase().chain(rc).collect(),
        _ => replacement.to_string(),
    }
}

/// Applies every lexicon entry that carries a replacement.
pub fn localize(text: &str, lexicon: &Lexicon) -> ReplacementReport {
    let active: Vec<&LexiconEntry> = lexicon.entries.iter().filter(|e| !e.replacement.is_empty()).collect();
    let protected: Vec<&str> = active.iter().map(|e| e.replacement.as_str()).collect();
    let replacements = find_matches(text, active.iter().copied(), &protected);
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for r in &replacements {
        out.extend(&chars[cursor..r.start]);
        out.push_str(&inherit_case(&r.matched_span, &r.entry.replacement));
        cursor = r.end;
    }
    out.extend(&chars[cursor..]);
    ReplacementReport { replacements, output_text: out }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub start: usize,
    pub end: usize,
    pub matched_span: String,
    pub rewrite: Option<String>,
}

/// Flags explicit phrasing; `rewrite` is set when the entry has a
/// replacement, in which case [`localize`] applies it.
pub fn lint_explicitness(text: &str, lexicon: &Lexicon) -> Vec<Advisory> {
    find_matches(text, lexicon.entries.iter().filter(|e| e.category == Category::Explicitness), &[])
        .into_iter()
        .map(|r| Advisory {
            start: r.start,
            end: r.end,
            rewrite: (!r.entry.replacement.is_empty()).then_some(r.entry.replacement),
            matched_span: r.matched_span,
        })
        .collect()
}
