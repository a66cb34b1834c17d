//! One conversation turn through normalize, translate, retrieve, generate,
//! guardrails, back-translate and localize.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cultural::ActionPlan;
use crate::gateway::{Gateway, GatewayError};
use crate::generation::{
    assemble_prompt, enforce_length, followup_mode, generate_answer, greet, shape_followup, FollowUp, Greeting, Policy, Turn,
};
use crate::knowledge::{KnowledgeChunk, KnowledgeError, KnowledgeIndex};
use crate::localization::{localize, Lexicon};
use crate::model::{ConversationId, GuardrailReport, Id, Language, MessageLog, PipelineTrace, StageTimings};
use crate::text::detect_language;
use crate::translation::{normalize_query, to_english, to_user_language, HintTable, TranslationError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("message text is empty")]
    EmptyQuery,
    #[error("gateway failure: {0}")]
    Gateway(#[from] GatewayError),
    #[error("retrieval failure: {0}")]
    Retrieval(#[from] KnowledgeError),
}

impl From<TranslationError> for PipelineError {
    fn from(e: TranslationError) -> Self {
        match e {
            TranslationError::Empty => PipelineError::EmptyQuery,
            TranslationError::Gateway(g) => PipelineError::Gateway(g),
        }
    }
}

/// Source of timestamps and stage durations.
#[derive(Debug, Clone)]
pub enum Clock {
    System,
    /// Always reports the same instant and zero-length stages.
    Frozen(DateTime<Utc>),
}

impl Clock {
    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Frozen(t) => *t,
        }
    }

    fn start(&self) -> Option<Instant> {
        matches!(self, Clock::System).then(Instant::now)
    }

    fn millis(start: Option<Instant>) -> u64 {
        start.map_or(0, |s| s.elapsed().as_millis() as u64)
    }
}

/// Source of conversation, message and trace identifiers.
#[derive(Debug)]
pub enum IdSource {
    Random,
    /// Hash of a seed and a counter; reproducible across runs.
    Seeded { seed: u64, next: AtomicU64 },
}

impl IdSource {
    pub fn seeded(seed: u64) -> Self {
        IdSource::Seeded { seed, next: AtomicU64::new(0) }
    }

    pub fn next_id(&self) -> Id {
        match self {
            IdSource::Random => Id::random(),
            IdSource::Seeded { seed, next } => {
                let n = next.fetch_add(1, Ordering::SeqCst);
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update(n.to_le_bytes());
                Id::from(hex::encode(&h.finalize()[..16]))
            }
        }
    }
}

/// Per-conversation memory carried between turns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationState {
    pub conversation_id: ConversationId,
    pub history: Vec<Turn>,
    pub declined_details: bool,
    pub turns: usize,
}

impl ConversationState {
    pub fn new(conversation_id: ConversationId) -> Self {
        ConversationState { conversation_id, history: Vec::new(), declined_details: false, turns: 0 }
    }
}

/// Everything one turn produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub log: MessageLog,
    pub trace: PipelineTrace,
}

impl TurnOutcome {
    pub fn response_text(&self) -> &str {
        &self.trace.localized_answer
    }
}

/// The configured engine. Shared between sessions; lexicon swaps are atomic
/// between turns.
pub struct Engine {
    gateway: Arc<dyn Gateway>,
    index: Arc<KnowledgeIndex>,
    hints: HintTable,
    lexicon: RwLock<Arc<Lexicon>>,
    policy: Policy,
    plan: ActionPlan,
    clock: Clock,
    ids: IdSource,
}

pub struct EngineParts {
    pub gateway: Arc<dyn Gateway>,
    pub index: Arc<KnowledgeIndex>,
    pub hints: HintTable,
    pub lexicon: Lexicon,
    pub policy: Policy,
    pub plan: ActionPlan,
    pub clock: Clock,
    pub ids: IdSource,
}

impl Engine {
    pub fn new(parts: EngineParts) -> Self {
        Engine {
            gateway: parts.gateway,
            index: parts.index,
            hints: parts.hints,
            lexicon: RwLock::new(Arc::new(parts.lexicon)),
            policy: parts.policy,
            plan: parts.plan,
            clock: parts.clock,
            ids: parts.ids,
        }
    }

    pub fn gateway(&self) -> &Arc<dyn Gateway> {
        &self.gateway
    }

    pub fn index(&self) -> &Arc<KnowledgeIndex> {
        &self.index
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn plan(&self) -> &ActionPlan {
        &self.plan
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn lexicon(&self) -> Arc<Lexicon> {
        self.lexicon.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn swap_lexicon(&self, lexicon: Lexicon) {
        *self.lexicon.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(lexicon);
    }

    pub fn new_id(&self) -> Id {
        self.ids.next_id()
    }

    pub fn open_conversation(&self) -> (ConversationState, Greeting) {
        let state = ConversationState::new(self.new_id());
        let greeting = greet(&self.policy.generation, true).expect("first turn always greets");
        (state, greeting)
    }

    fn fallback_for(&self, target: Language) -> &str {
        match target {
            Language::English => &self.policy.generation.fallback_answer,
            _ => &self.policy.generation.fallback_answer_hinglish,
        }
    }

    /// Runs one turn and updates `state`. The delivered answer always passes
    /// the guardrails.
    pub fn run_turn(&self, state: &mut ConversationState, text: &str) -> Result<TurnOutcome, PipelineError> {
        let raw = text.trim();
        if raw.is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let gw = self.gateway.as_ref();
        let g = &self.policy.generation;
        let mut notes = Vec::new();
        let mut timings = StageTimings::default();
        let timestamp = self.clock.now();
        let language = detect_language(raw);
        let target = if language == Language::English { Language::English } else { Language::Hinglish };
        if language == Language::Other {
            notes.push("language: devanagari input, answering in hinglish".to_string());
        }

        let t = self.clock.start();
        let normalized = normalize_query(gw, raw)?;
        timings.normalize_ms = Clock::millis(t);
        notes.extend(normalized.note);
        let normalized = normalized.text;

        let t = self.clock.start();
        let english = to_english(gw, &normalized, &self.hints)?;
        timings.translate_ms = Clock::millis(t);
        if language == Language::English {
            notes.push("translate: english input passed through".into());
        }

        let t = self.clock.start();
        let results = self.index.retrieve(gw, &english, g.retrieval_k, None)?;
        let snapshot = self.index.snapshot();
        let retrieved: Vec<KnowledgeChunk> = results.iter().filter_map(|r| snapshot.get(&r.chunk_id).cloned()).collect();
        timings.retrieve_ms = Clock::millis(t);
        if retrieved.is_empty() {
            notes.push("retrieve: no context found, referral instruction added".into());
        }

        let query_forms = format!("{raw}\n{english}");
        if self.policy.guardrails.declined.is_match(&query_forms) {
            state.declined_details = true;
        }
        let mut mode = followup_mode(&self.policy, &query_forms, state.declined_details);
        if mode == FollowUp::Required && !self.plan.followup_enabled() {
            mode = FollowUp::Allowed;
        }

        let t = self.clock.start();
        let prompt = assemble_prompt(&self.policy, &self.plan.prompt_fragments(), &retrieved, &state.history, &english)?;
        let first = self.draft(gw, &prompt, mode, &mut notes)?;
        timings.generate_ms = Clock::millis(t);

        let t = self.clock.start();
        let mut report = self.policy.guardrails.apply(&first, &query_forms);
        let mut draft = first;
        if !report.passed {
            notes.push(format!("guardrails: draft failed ({}), regenerating", describe(&report)));
            let mut retry = prompt.clone();
            retry.user_text.push_str(&format!(
                "\n\nYour previous answer broke these rules: {}. Write it again without breaking them.",
                describe(&report)
            ));
            let t_gen = self.clock.start();
            draft = self.draft(gw, &retry, mode, &mut notes)?;
            timings.generate_ms += Clock::millis(t_gen);
            report = self.policy.guardrails.apply(&draft, &query_forms);
            if !report.passed {
                notes.push(format!("guardrails: regenerated draft failed ({}), using fallback", describe(&report)));
                draft = g.fallback_answer.clone();
            }
        }
        timings.guardrails_ms = Clock::millis(t);
        let used_fallback = draft == g.fallback_answer;

        let t = self.clock.start();
        let answer_user = if used_fallback {
            notes.push("back_translate: fallback answer taken from policy".into());
            self.fallback_for(target).to_string()
        } else {
            let translated = to_user_language(gw, &draft, target)?;
            let user_mode = if mode == FollowUp::Required { FollowUp::Allowed } else { mode };
            let shaped = shape_followup(&translated, user_mode, "");
            if shaped.trim().is_empty() { translated } else { shaped }
        };
        timings.back_translate_ms = Clock::millis(t);
        if target == Language::English {
            notes.push("back_translate: english user, identity".into());
        }

        let t = self.clock.start();
        let lexicon = self.lexicon();
        let localized = localize(&answer_user, &lexicon);
        if !localized.replacements.is_empty() {
            notes.push(format!("localize: {} replacement(s)", localized.replacements.len()));
        }
        let mut delivered = match enforce_length(&localized.output_text, g.word_cap) {
            Ok(c) => {
                if c.text != localized.output_text {
                    notes.push("length: localized answer truncated".into());
                }
                c.text
            }
            Err(_) => self.fallback_for(target).to_string(),
        };
        timings.localize_ms = Clock::millis(t);

        let final_report = self.policy.guardrails.apply(&format!("{draft}\n{delivered}"), &query_forms);
        if final_report.passed {
            report = final_report;
        } else {
            notes.push(format!("guardrails: delivered text failed ({}), using fallback", describe(&final_report)));
            delivered = self.fallback_for(target).to_string();
            report = self.policy.guardrails.apply(&format!("{}\n{delivered}", g.fallback_answer), &query_forms);
        }
        debug_assert!(report.passed);

        let message_id = self.new_id();
        let trace = PipelineTrace {
            trace_id: self.new_id(),
            conversation_id: state.conversation_id.clone(),
            message_id: message_id.clone(),
            language: language.into(),
            raw_query: raw.to_string(),
            normalized_query: normalized,
            english_query: english.clone(),
            retrieved_chunk_ids: retrieved.iter().map(|c| c.chunk_id.clone()).collect(),
            draft_answer_english: draft.clone(),
            answer_user_language: answer_user,
            localized_answer: delivered.clone(),
            guardrail_report: report,
            stage_timings: timings,
            notes,
        };
        let log = MessageLog {
            conversation_id: state.conversation_id.clone(),
            message_id,
            timestamp,
            language: language.into(),
            user_text: raw.to_string(),
            response_text: delivered,
            topic: None,
            question_type: None,
        };
        state.history.push(Turn { user: english, assistant: draft });
        state.turns += 1;
        Ok(TurnOutcome { log, trace })
    }

    fn draft(
        &self,
        gw: &dyn Gateway,
        prompt: &crate::gateway::PromptRequest,
        mode: FollowUp,
        notes: &mut Vec<String>,
    ) -> Result<String, PipelineError> {
        let g = &self.policy.generation;
        let raw = generate_answer(gw, prompt)?;
        let shaped = shape_followup(&raw, mode, &g.default_followup_question);
        let shaped = if shaped.trim().is_empty() { raw } else { shaped };
        let capped = enforce_length(&shaped, g.word_cap).map_err(|_| GatewayError::MalformedEnvelope {
            key: prompt.expected_envelope_key.clone(),
        })?;
        if capped.overlong_sentence {
            notes.push("length: first sentence exceeds the word cap, kept whole".into());
        } else if capped.text != shaped.trim() {
            notes.push("length: draft truncated at a sentence boundary".into());
        }
        Ok(capped.text)
    }
}

fn describe(report: &GuardrailReport) -> String {
    let mut parts: Vec<String> = report.violations.iter().map(|v| format!("{}: \"{}\"", v.rule_id, v.matched_span)).collect();
    if report.referral_required && !report.referral_present {
        parts.push("missing referral".into());
    }
    parts.join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cultural::CulturalProfile;
    use crate::gateway::{MockGateway, KEY_MEDICAL_ANSWER, KEY_TRANSLATED, KEY_UPDATED};
    use chrono::TimeZone;

    fn engine(mock: MockGateway) -> Engine {
        Engine::new(EngineParts {
            gateway: Arc::new(mock),
            index: Arc::new(KnowledgeIndex::new()),
            hints: HintTable::from_json(crate::assets::HINTS_JSON).unwrap(),
            lexicon: Lexicon::parse_tsv(crate::assets::LEXICON_TSV).unwrap(),
            policy: Policy::shipped(),
            plan: ActionPlan::compile(&CulturalProfile::default()),
            clock: Clock::Frozen(Utc.with_ymd_and_hms(2024, 3, 1, 7, 0, 0).unwrap()),
            ids: IdSource::seeded(7),
        })
    }

    #[test]
    fn seeded_ids_are_reproducible_hex() {
        let (a, b) = (IdSource::seeded(1), IdSource::seeded(1));
        let x = a.next_id();
        assert_eq!(x, b.next_id());
        assert_ne!(x, a.next_id());
        assert_eq!(x.as_str().len(), 32);
        assert!(x.as_str().chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }

    #[test]
    fn english_turn_skips_translation_and_fills_trace() {
        let e = engine(MockGateway::new(0, 32));
        let (mut s, greeting) = e.open_conversation();
        assert!(greeting.text.starts_with("Namaste"));
        let out = e.run_turn(&mut s, "What is a condom?").unwrap();
        let t = &out.trace;
        assert_eq!(t.english_query, "What is a condom?");
        assert!(t.notes.iter().any(|n| n.contains("english input")));
        assert!(t.notes.iter().any(|n| n.contains("no context")));
        assert!(t.guardrail_report.passed);
        assert_eq!(out.log.response_text, t.localized_answer);
        assert_eq!(t.stage_timings, StageTimings::default());
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn failing_drafts_fall_back() {
        let mut m = MockGateway::new(0, 32);
        let q = "Mujhe kaunsi goli leni chahiye?";
        m.insert_value(KEY_UPDATED, q, q);
        m.insert_value(KEY_TRANSLATED, q, "Which pill should I take?");
        m.insert_value(KEY_MEDICAL_ANSWER, "Which pill should I take?", "Take Ovral 2 tablets daily.");
        let e = engine(m);
        let (mut s, _) = e.open_conversation();
        let out = e.run_turn(&mut s, q).unwrap();
        assert_eq!(out.trace.draft_answer_english, Policy::shipped().generation.fallback_answer);
        assert_eq!(out.trace.localized_answer, Policy::shipped().generation.fallback_answer_hinglish);
        assert!(out.trace.guardrail_report.passed);
        assert!(out.trace.notes.iter().any(|n| n.contains("regenerating")));
    }

    #[test]
    fn register_slip_in_translation_is_caught() {
        let mut m = MockGateway::new(0, 32);
        let q = "Condom kya hota hai?";
        let en = "What is a condom?";
        let ans = "A condom is a thin cover worn during sex. Please consult a doctor with Telehealth for more help.";
        m.insert_value(KEY_TRANSLATED, q, en);
        m.insert_value(KEY_MEDICAL_ANSWER, en, ans);
        m.insert_value(KEY_TRANSLATED, ans, "Condom ek patla cover hai jo tu sex ke samay pehenti hai.");
        let e = engine(m);
        let (mut s, _) = e.open_conversation();
        let out = e.run_turn(&mut s, q).unwrap();
        assert_eq!(out.trace.localized_answer, Policy::shipped().generation.fallback_answer_hinglish);
        assert!(out.trace.guardrail_report.passed);
    }

    #[test]
    fn empty_text_and_gateway_down() {
        let e = engine(MockGateway::new(0, 32));
        let (mut s, _) = e.open_conversation();
        assert!(matches!(e.run_turn(&mut s, "   "), Err(PipelineError::EmptyQuery)));
        let m = MockGateway::new(0, 32);
        m.set_healthy(false);
        let e = engine(m);
        assert!(matches!(e.run_turn(&mut s, "hello there"), Err(PipelineError::Gateway(_))));
    }

    #[test]
    fn declining_details_sticks_for_the_conversation() {
        let e = engine(MockGateway::new(0, 32));
        let (mut s, _) = e.open_conversation();
        e.run_turn(&mut s, "I don't know anything about it").unwrap();
        assert!(s.declined_details);
    }
}
