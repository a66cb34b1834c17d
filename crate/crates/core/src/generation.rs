//! Answer generation: prompt assembly around retrieved context, the
//! follow-up and length policies, and rule-based guardrails.

use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, PromptRequest, KEY_MEDICAL_ANSWER};
use crate::knowledge::KnowledgeChunk;
use crate::model::{GuardrailReport, Topic, Violation};
use crate::text::{is_question, sentence_spans, word_count};

pub const MIN_WORD_CAP: usize = 25;
pub const SUGGESTION_COUNT: usize = 3;

/// Reporting order of topics by observed demand; starter questions follow it.
pub const TOPIC_DEMAND_ORDER: [Topic; 10] = [
    Topic::ContraceptiveMethods,
    Topic::FamilyPlanning,
    Topic::SexualHealth,
    Topic::Pregnancy,
    Topic::Sterilization,
    Topic::ReproductiveAnatomy,
    Topic::MenstrualHealth,
    Topic::Abortion,
    Topic::FertilitySupport,
    Topic::Miscarriage,
];

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy parse error: {0}")]
    Parse(String),
    #[error("pattern list `{list}`, line {line}: {message}")]
    Pattern { list: String, line: usize, message: String },
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("policy i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarterQuestion {
    pub topic: Topic,
    pub text: String,
}

/// Knobs for the answer generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPolicy {
    pub persona_text: String,
    pub word_cap: usize,
    pub history_window: usize,
    pub retrieval_k: usize,
    pub referral_phrase: String,
    pub greeting_text: String,
    pub followup_enabled: bool,
    pub default_followup_question: String,
    pub fallback_answer: String,
    pub fallback_answer_hinglish: String,
    pub apology_english: String,
    pub apology_hinglish: String,
    #[serde(default)]
    pub starter_questions: Vec<StarterQuestion>,
}

impl GenerationPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.word_cap < MIN_WORD_CAP {
            return Err(PolicyError::Invalid(format!("word_cap must be at least {MIN_WORD_CAP}")));
        }
        if self.referral_phrase.trim().is_empty() {
            return Err(PolicyError::Invalid("referral_phrase is empty".into()));
        }
        if self.retrieval_k == 0 {
            return Err(PolicyError::Invalid("retrieval_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
struct PatternText {
    #[serde(default)]
    prescription: String,
    #[serde(default)]
    test_order: String,
    #[serde(default)]
    register: String,
    #[serde(default)]
    referral: String,
    #[serde(default)]
    referral_required: String,
    #[serde(default)]
    misconception: String,
    #[serde(default)]
    symptom: String,
    #[serde(default)]
    detail: String,
    #[serde(default)]
    declined: String,
}

#[derive(Deserialize)]
struct PolicyFile {
    #[serde(flatten)]
    generation: GenerationPolicy,
    #[serde(default)]
    patterns: PatternText,
}

/// A named list of case-insensitive patterns.
#[derive(Debug, Clone, Default)]
pub struct PatternList(Vec<Regex>);

impl PatternList {
    /// One regex per line; blank lines and `#` comments are skipped.
    pub fn parse(name: &str, text: &str) -> Result<Self, PolicyError> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let re = RegexBuilder::new(line).case_insensitive(true).build().map_err(|e| PolicyError::Pattern {
                list: name.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(re);
        }
        Ok(PatternList(out))
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.0.iter().any(|r| r.is_match(text))
    }

    /// First match of any pattern, in pattern order.
    pub fn find<'t>(&self, text: &'t str) -> Option<&'t str> {
        self.0.iter().find_map(|r| r.find(text)).map(|m| m.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Compiled rule lists used by the guardrails and the follow-up policy.
#[derive(Debug, Clone, Default)]
pub struct Guardrails {
    pub prescription: PatternList,
    pub test_order: PatternList,
    pub register: PatternList,
    pub referral: PatternList,
    pub referral_required: PatternList,
    pub misconception: PatternList,
    pub symptom: PatternList,
    pub detail: PatternList,
    pub declined: PatternList,
}

pub const RULE_PRESCRIPTION: &str = "prescription";
pub const RULE_TEST_ORDER: &str = "test_order";
pub const RULE_REGISTER: &str = "register";

impl Guardrails {
    fn compile(p: &PatternText, referral_phrase: &str) -> Result<Self, PolicyError> {
        let referral = format!("{}\n{}", p.referral, regex::escape(referral_phrase.trim()));
        Ok(Guardrails {
            prescription: PatternList::parse("prescription", &p.prescription)?,
            test_order: PatternList::parse("test_order", &p.test_order)?,
            register: PatternList::parse("register", &p.register)?,
            referral: PatternList::parse("referral", &referral)?,
            referral_required: PatternList::parse("referral_required", &p.referral_required)?,
            misconception: PatternList::parse("misconception", &p.misconception)?,
            symptom: PatternList::parse("symptom", &p.symptom)?,
            detail: PatternList::parse("detail", &p.detail)?,
            declined: PatternList::parse("declined", &p.declined)?,
        })
    }

    /// Scans a draft. `query` decides whether a referral is mandatory.
    pub fn apply(&self, draft: &str, query: &str) -> GuardrailReport {
        let mut violations = Vec::new();
        for r in &self.prescription.0 {
            for m in r.find_iter(draft) {
                violations.push(Violation { rule_id: RULE_PRESCRIPTION.into(), matched_span: m.as_str().into() });
            }
        }
        for span in sentence_spans(draft) {
            let sentence = &draft[span];
            if let Some(m) = self.test_order.find(sentence) {
                if !self.referral.is_match(sentence) {
                    violations.push(Violation { rule_id: RULE_TEST_ORDER.into(), matched_span: m.into() });
                }
            }
        }
        for r in &self.register.0 {
            for m in r.find_iter(draft) {
                violations.push(Violation { rule_id: RULE_REGISTER.into(), matched_span: m.as_str().into() });
            }
        }
        let referral_present = self.referral.is_match(draft);
        let referral_required = self.referral_required.is_match(query);
        GuardrailReport::new(violations, referral_present, referral_required)
    }
}

/// Generation policy plus its compiled rule lists, loaded from one file.
#[derive(Debug, Clone)]
pub struct Policy {
    pub generation: GenerationPolicy,
    pub guardrails: Guardrails,
}

impl Policy {
    pub fn from_toml(text: &str) -> Result<Self, PolicyError> {
        let file: PolicyFile = toml::from_str(text).map_err(|e| PolicyError::Parse(e.to_string()))?;
        let mut generation = file.generation;
        generation.persona_text = generation.persona_text.trim().to_string();
        generation.validate()?;
        let guardrails = Guardrails::compile(&file.patterns, &generation.referral_phrase)?;
        Ok(Policy { generation, guardrails })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::from_toml(crate::assets::POLICY_TOML).expect("shipped policy is valid")
    }
}

/// One earlier exchange, in English.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub user: String,
    pub assistant: String,
}

/// Builds the answer prompt. The system part holds persona, cultural
/// fragments, quoted context and history; the user part holds the query
/// followed by the rules.
pub fn assemble_prompt(
    policy: &Policy,
    profile_fragments: &[String],
    retrieved: &[KnowledgeChunk],
    history: &[Turn],
    english_query: &str,
) -> Result<PromptRequest, GatewayError> {
    let g = &policy.generation;
    let mut system = String::new();
    system.push_str(&g.persona_text);
    if !profile_fragments.is_empty() {
        system.push_str("\n\nCultural guidance:");
        for f in profile_fragments {
            system.push_str("\n- ");
            system.push_str(f);
        }
    }
    if !retrieved.is_empty() {
        system.push_str("\n\nBase your answer on this information from our doctors:");
        for c in retrieved {
            system.push_str("\n\"\"\"\n");
            system.push_str(c.text.trim());
            system.push_str("\n\"\"\"");
        }
    }
    let window = &history[history.len().saturating_sub(g.history_window)..];
    if !window.is_empty() {
        system.push_str("\n\nConversation so far (most recent last):");
        for t in window {
            system.push_str(&format!("\nUser: {}\nAssistant: {}", t.user.trim(), t.assistant.trim()));
        }
    }

    let referral = &g.referral_phrase;
    let mut user = String::new();
    user.push_str(english_query.trim());
    user.push_str("\n\nRules:");
    user.push_str("\n- Do not prescribe medicines or doses.");
    user.push_str("\n- Do not recommend tests outright; leave tests to the doctor.");
    user.push_str("\n- Go step by step like a doctor. If you need more details, ask one follow-up question about one thing.");
    user.push_str(&format!("\n- If you are unsure, or the user seems hesitant, say: \"{referral}\"."));
    user.push_str(&format!("\n- Use simple, common words and at most {} words.", g.word_cap));
    if retrieved.is_empty() {
        user.push_str(&format!(
            "\n- No verified information was found for this question. Keep the answer short and prefer referring the user: \"{referral}\"."
        ));
    }
    if policy.guardrails.misconception.is_match(english_query) {
        user.push_str("\n- The question rests on a common misconception. Name the misconception and correct it clearly and kindly.");
    }
    PromptRequest::new(system, user, KEY_MEDICAL_ANSWER, g.word_cap)
}

pub fn generate_answer(gateway: &dyn Gateway, prompt: &PromptRequest) -> Result<String, GatewayError> {
    let draft = gateway.complete(prompt)?;
    let draft = draft.trim();
    if draft.is_empty() {
        return Err(GatewayError::MalformedEnvelope { key: prompt.expected_envelope_key.clone() });
    }
    Ok(draft.to_string())
}

/// What the follow-up policy decided for one turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowUp {
    /// Exactly one question, placed last.
    Required,
    /// At most one question, left where it is.
    Allowed,
    /// The user declined to give details; no questions.
    Suppressed,
}

/// Decides the follow-up mode. `query` may combine the raw and English
/// forms; `declined_earlier` is true when an earlier turn in the same
/// conversation declined details.
pub fn followup_mode(policy: &Policy, query: &str, declined_earlier: bool) -> FollowUp {
    let g = &policy.guardrails;
    if !policy.generation.followup_enabled || declined_earlier || g.declined.is_match(query) {
        return FollowUp::Suppressed;
    }
    if g.symptom.is_match(query) && !g.detail.is_match(query) {
        FollowUp::Required
    } else {
        FollowUp::Allowed
    }
}

fn tidy(text: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    for line in text.lines() {
        let collapsed = line.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ");
        let indent: String = line.chars().take_while(|c| *c == ' ').collect();
        if collapsed.is_empty() {
            if lines.last().is_some_and(|l| !l.is_empty()) {
                lines.push(String::new());
            }
        } else {
            lines.push(format!("{indent}{collapsed}"));
        }
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

/// Rewrites the draft's questions to match `mode`.
pub fn shape_followup(draft: &str, mode: FollowUp, default_question: &str) -> String {
    let spans = sentence_spans(draft);
    let questions: Vec<_> = spans.iter().filter(|s| is_question(&draft[(*s).clone()])).cloned().collect();
    let keep_in_place = match mode {
        FollowUp::Allowed => questions.first().cloned(),
        _ => None,
    };
    let mut out = String::new();
    let mut cursor = 0;
    for q in &questions {
        if Some(q) == keep_in_place.as_ref() {
            continue;
        }
        out.push_str(&draft[cursor..q.start]);
        cursor = q.end + draft[q.end..].len() - draft[q.end..].trim_start_matches(' ').len();
    }
    out.push_str(&draft[cursor..]);
    let mut out = tidy(&out);
    if mode == FollowUp::Required {
        let q = questions.first().map(|q| &draft[q.clone()]).unwrap_or(default_question);
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(q);
    }
    out
}

/// Result of [`enforce_length`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capped {
    pub text: String,
    /// The first sentence alone exceeded the cap and was kept whole.
    pub overlong_sentence: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("draft is empty")]
pub struct EmptyDraft;

/// Truncates to at most `word_cap` words at a sentence boundary.
pub fn enforce_length(draft: &str, word_cap: usize) -> Result<Capped, EmptyDraft> {
    let draft = draft.trim();
    if draft.is_empty() {
        return Err(EmptyDraft);
    }
    if word_count(draft) <= word_cap {
        return Ok(Capped { text: draft.to_string(), overlong_sentence: false });
    }
    let spans = sentence_spans(draft);
    let mut end = None;
    for s in &spans {
        if word_count(&draft[..s.end]) <= word_cap {
            end = Some(s.end);
        } else {
            break;
        }
    }
    Ok(match end {
        Some(e) => Capped { text: draft[..e].trim_end().to_string(), overlong_sentence: false },
        None => Capped { text: draft[spans[0].clone()].to_string(), overlong_sentence: true },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Greeting {
    pub text: String,
    pub suggested_questions: Vec<String>,
}

/// Greeting for the first turn of a session; `None` afterwards.
pub fn greet(policy: &GenerationPolicy, first_turn: bool) -> Option<Greeting> {
    if !first_turn {
        return None;
    }
    let mut suggestions = Vec::new();
    for topic in TOPIC_DEMAND_ORDER {
        if let Some(q) = policy.starter_questions.iter().find(|q| q.topic == topic) {
            suggestions.push(q.text.clone());
        }
        if suggestions.len() == SUGGESTION_COUNT {
            break;
        }
    }
    Some(Greeting { text: policy.greeting_text.clone(), suggested_questions: suggestions })
}
