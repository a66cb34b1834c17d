//! Shared data model: conversation identifiers, message logs, taxonomy
//! enums and the per-turn pipeline trace.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// 128-bit random identifier rendered as 32 lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

impl Id {
    pub fn random() -> Self {
        Id(format!("{:032x}", rand::random::<u128>()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Id {
    fn from(s: &str) -> Self {
        Id(s.to_string())
    }
}

impl From<String> for Id {
    fn from(s: String) -> Self {
        Id(s)
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type ConversationId = Id;
pub type MessageId = Id;

/// Opens a new conversation. The instant is accepted for symmetry with the
/// log schema; identifiers never depend on it, so two calls at the same
/// instant still yield distinct ids.
pub fn new_conversation(_now: DateTime<Utc>) -> ConversationId {
    Id::random()
}

/// A closed string enum with a stable snake_case wire name.
pub trait WireEnum: Sized + Copy + 'static {
    const ALL: &'static [Self];
    fn wire_name(self) -> &'static str;

    fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|v| v.wire_name() == s)
    }
}

/// A known enum value or the raw string it was ingested from.
///
/// Ingest is lossless: unrecognised strings survive a read/write cycle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label<T> {
    Known(T),
    Other(String),
}

impl<T: WireEnum> Label<T> {
    pub fn parse(s: &str) -> Self {
        T::from_wire(s)
            .map(Label::Known)
            .unwrap_or_else(|| Label::Other(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Known(v) => v.wire_name(),
            Label::Other(raw) => raw,
        }
    }

    pub fn known(&self) -> Option<T> {
        match self {
            Label::Known(v) => Some(*v),
            Label::Other(_) => None,
        }
    }
}

impl<T> From<T> for Label<T> {
    fn from(v: T) -> Self {
        Label::Known(v)
    }
}

impl<T: WireEnum> Serialize for Label<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de, T: WireEnum> Deserialize<'de> for Label<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(Label::parse(&raw))
    }
}

macro_rules! wire_enum {
    ($name:ident { $($variant:ident => $wire:literal),+ $(,)? }) => {
        impl WireEnum for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];
            fn wire_name(self) -> &'static str {
                match self { $($name::$variant => $wire),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.wire_name())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::from_wire(s).ok_or_else(|| format!("unknown {}: {s}", stringify!($name)))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.wire_name())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    Hinglish,
    English,
    Other,
}

wire_enum!(Language { Hinglish => "hinglish", English => "english", Other => "other" });

/// SRH topic categories, in the order they are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    ContraceptiveMethods,
    FamilyPlanning,
    SexualHealth,
    Pregnancy,
    Sterilization,
    ReproductiveAnatomy,
    MenstrualHealth,
    Abortion,
    FertilitySupport,
    Miscarriage,
    FollowUp,
}

wire_enum!(Topic {
    ContraceptiveMethods => "contraceptive_methods",
    FamilyPlanning => "family_planning",
    SexualHealth => "sexual_health",
    Pregnancy => "pregnancy",
    Sterilization => "sterilization",
    ReproductiveAnatomy => "reproductive_anatomy",
    MenstrualHealth => "menstrual_health",
    Abortion => "abortion",
    FertilitySupport => "fertility_support",
    Miscarriage => "miscarriage",
    FollowUp => "follow_up",
});

impl Topic {
    pub fn display_name(self) -> &'static str {
        match self {
            Topic::ContraceptiveMethods => "Contraceptive methods",
            Topic::FamilyPlanning => "Family planning",
            Topic::SexualHealth => "Sexual health",
            Topic::Pregnancy => "Pregnancy",
            Topic::Sterilization => "Sterilization",
            Topic::ReproductiveAnatomy => "Reproductive anatomy",
            Topic::MenstrualHealth => "Menstrual health",
            Topic::Abortion => "Abortion",
            Topic::FertilitySupport => "Fertility support",
            Topic::Miscarriage => "Miscarriage",
            Topic::FollowUp => "Follow-up",
        }
    }
}

/// Intent categories for user questions, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionType {
    BasicConceptualInquiry,
    ComplexQuery,
    AdviceOpinion,
    HealthSafetyConcern,
    Misconception,
    NormsAndEthics,
    HealthcareAccess,
    FollowUp,
}

wire_enum!(QuestionType {
    BasicConceptualInquiry => "basic_conceptual_inquiry",
    ComplexQuery => "complex_query",
    AdviceOpinion => "advice_opinion",
    HealthSafetyConcern => "health_safety_concern",
    Misconception => "misconception",
    NormsAndEthics => "norms_and_ethics",
    HealthcareAccess => "healthcare_access",
    FollowUp => "follow_up",
});

impl QuestionType {
    pub fn display_name(self) -> &'static str {
        match self {
            QuestionType::BasicConceptualInquiry => "Basic conceptual inquiries",
            QuestionType::ComplexQuery => "Complex queries",
            QuestionType::AdviceOpinion => "Advice/Opinion",
            QuestionType::HealthSafetyConcern => "Health and safety concerns",
            QuestionType::Misconception => "Misconception",
            QuestionType::NormsAndEthics => "Norms and ethics",
            QuestionType::HealthcareAccess => "Healthcare access",
            QuestionType::FollowUp => "Follow-up",
        }
    }
}

/// One logged question/answer interaction. Field names are the on-disk
/// JSON-lines schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLog {
    pub conversation_id: ConversationId,
    pub message_id: MessageId,
    pub timestamp: DateTime<Utc>,
    pub language: Label<Language>,
    pub user_text: String,
    pub response_text: String,
    pub topic: Option<Label<Topic>>,
    pub question_type: Option<Label<QuestionType>>,
}

impl MessageLog {
    pub fn validate(&self) -> Result<(), String> {
        if self.user_text.trim().is_empty() {
            return Err("user_text is empty".into());
        }
        if self.conversation_id.as_str().is_empty() || self.message_id.as_str().is_empty() {
            return Err("identifiers must be non-empty".into());
        }
        Ok(())
    }
}

/// Orders a conversation's logs by `(timestamp, message_id)`. The sort is
/// stable, so fully equal keys keep their input order.
pub fn conversation_history(logs: &[MessageLog], conversation: &ConversationId) -> Vec<MessageLog> {
    let mut out: Vec<MessageLog> = logs
        .iter()
        .filter(|l| &l.conversation_id == conversation)
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.message_id.cmp(&b.message_id))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub matched_span: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GuardrailReport {
    pub violations: Vec<Violation>,
    pub referral_present: bool,
    pub referral_required: bool,
    pub register_ok: bool,
    pub passed: bool,
}

impl GuardrailReport {
    /// Builds a report with `passed` derived from the other fields.
    pub fn new(violations: Vec<Violation>, referral_present: bool, referral_required: bool) -> Self {
        let register_ok = !violations.iter().any(|v| v.rule_id == "register");
        let passed = violations.is_empty() && (referral_present || !referral_required);
        GuardrailReport {
            violations,
            referral_present,
            referral_required,
            register_ok,
            passed,
        }
    }
}

/// Wall-clock duration of each pipeline stage, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub normalize_ms: u64,
    pub translate_ms: u64,
    pub retrieve_ms: u64,
    pub generate_ms: u64,
    pub guardrails_ms: u64,
    pub back_translate_ms: u64,
    pub localize_ms: u64,
}

/// Auditable record of one turn through the three-stage flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub trace_id: Id,
    pub conversation_id: ConversationId,
    pub message_id: MessageId,
    pub language: Label<Language>,
    pub raw_query: String,
    pub normalized_query: String,
    pub english_query: String,
    pub retrieved_chunk_ids: Vec<String>,
    pub draft_answer_english: String,
    pub answer_user_language: String,
    pub localized_answer: String,
    pub guardrail_report: GuardrailReport,
    pub stage_timings: StageTimings,
    /// Explicit record of skipped stages, fallbacks and flags.
    pub notes: Vec<String>,
}
