//! Four-layer cultural context schema and its compilation into concrete
//! pipeline actions.
//!
//! A profile is an operator-authored YAML document with one mapping per
//! layer, each mapping a dimension name to a free-text payload:
//!
//! ```yaml
//! Societal:
//!   LawsAndRegulations: "Age of consent in India is 18 years."
//! Community:
//!   Dialect: packs/mumbai.tsv
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const PAYLOAD_CAP: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    Societal,
    Regional,
    Community,
    Individual,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Societal, Layer::Regional, Layer::Community, Layer::Individual];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Societal => "Societal",
            Layer::Regional => "Regional",
            Layer::Community => "Community",
            Layer::Individual => "Individual",
        }
    }

    fn parse(s: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    MedicalConsensus,
    LawsAndRegulations,
    SpokenLanguage,
    WrittenScript,
    HealthcareAccess,
    CommunityDynamics,
    CommunityBeliefs,
    Religion,
    CasteAndTribe,
    Dialect,
    GenderRoles,
    Diet,
    HouseholdDynamics,
    PrivacyPractices,
    Age,
    IncomeAndOccupation,
    MaritalStatus,
    DigitalLiteracy,
    HealthLiteracy,
    MedicalHistory,
    Disabilities,
}

impl Dimension {
    pub const ALL: [Dimension; 21] = [
        Dimension::MedicalConsensus,
        Dimension::LawsAndRegulations,
        Dimension::SpokenLanguage,
        Dimension::WrittenScript,
        Dimension::HealthcareAccess,
        Dimension::CommunityDynamics,
        Dimension::CommunityBeliefs,
        Dimension::Religion,
        Dimension::CasteAndTribe,
        Dimension::Dialect,
        Dimension::GenderRoles,
        Dimension::Diet,
        Dimension::HouseholdDynamics,
        Dimension::PrivacyPractices,
        Dimension::Age,
        Dimension::IncomeAndOccupation,
        Dimension::MaritalStatus,
        Dimension::DigitalLiteracy,
        Dimension::HealthLiteracy,
        Dimension::MedicalHistory,
        Dimension::Disabilities,
    ];

    pub fn layer(self) -> Layer {
        use Dimension::*;
        match self {
            MedicalConsensus | LawsAndRegulations => Layer::Societal,
            SpokenLanguage | WrittenScript | HealthcareAccess => Layer::Regional,
            CommunityDynamics | CommunityBeliefs | Religion | CasteAndTribe | Dialect | GenderRoles | Diet => {
                Layer::Community
            }
            HouseholdDynamics | PrivacyPractices | Age | IncomeAndOccupation | MaritalStatus | DigitalLiteracy
            | HealthLiteracy | MedicalHistory | Disabilities => Layer::Individual,
        }
    }

    /// Config key, e.g. `CasteAndTribe`.
    pub fn name(self) -> &'static str {
        use Dimension::*;
        match self {
            MedicalConsensus => "MedicalConsensus",
            LawsAndRegulations => "LawsAndRegulations",
            SpokenLanguage => "SpokenLanguage",
            WrittenScript => "WrittenScript",
            HealthcareAccess => "HealthcareAccess",
            CommunityDynamics => "CommunityDynamics",
            CommunityBeliefs => "CommunityBeliefs",
            Religion => "Religion",
            CasteAndTribe => "CasteAndTribe",
            Dialect => "Dialect",
            GenderRoles => "GenderRoles",
            Diet => "Diet",
            HouseholdDynamics => "HouseholdDynamics",
            PrivacyPractices => "PrivacyPractices",
            Age => "Age",
            IncomeAndOccupation => "IncomeAndOccupation",
            MaritalStatus => "MaritalStatus",
            DigitalLiteracy => "DigitalLiteracy",
            HealthLiteracy => "HealthLiteracy",
            MedicalHistory => "MedicalHistory",
            Disabilities => "Disabilities",
        }
    }

    /// Dimensions whose action needs operator-supplied content.
    pub fn requires_payload(self) -> bool {
        matches!(self, Dimension::Dialect | Dimension::SpokenLanguage)
    }

    fn lookup(raw: &str) -> Option<Dimension> {
        let key = squash(raw);
        Dimension::ALL.into_iter().find(|d| {
            let canon = squash(d.name());
            canon == key || canon.replace("and", "") == key
        })
    }

    fn nearest(raw: &str) -> Dimension {
        let key = squash(raw);
        Dimension::ALL
            .into_iter()
            .map(|d| (d, strsim::normalized_levenshtein(&key, &squash(d.name()))))
            .fold((Dimension::MedicalConsensus, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0
    }
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A `(layer, dimension)` pair used to tag knowledge-base content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(pub Dimension);

impl Tag {
    pub fn layer(self) -> Layer {
        self.0.layer()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.layer(), self.0)
    }
}

impl FromStr for Tag {
    type Err = ProfileError;

    /// Parses `Layer/Dimension`, checking the dimension belongs to the layer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (layer_raw, dim_raw) = s
            .split_once('/')
            .ok_or_else(|| ProfileError::Parse(format!("tag `{s}` is not of the form Layer/Dimension")))?;
        let layer = Layer::parse(layer_raw).ok_or_else(|| ProfileError::UnknownLayer(layer_raw.trim().to_string()))?;
        let dim = resolve_dimension(dim_raw, layer)?;
        Ok(Tag(dim))
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile parse error: {0}")]
    Parse(String),
    #[error("unknown context layer `{0}` (expected Societal, Regional, Community or Individual)")]
    UnknownLayer(String),
    #[error("unknown dimension `{name}` under {layer}; did you mean `{suggestion}`?")]
    UnknownDimension {
        name: String,
        layer: Layer,
        suggestion: Dimension,
    },
    #[error("dimension {dimension} belongs to the {expected} layer, not {found}")]
    WrongLayer {
        dimension: Dimension,
        found: Layer,
        expected: Layer,
    },
    #[error("dimension {0} needs a non-empty payload")]
    EmptyPayload(Dimension),
}

fn resolve_dimension(raw: &str, layer: Layer) -> Result<Dimension, ProfileError> {
    let dim = Dimension::lookup(raw).ok_or_else(|| ProfileError::UnknownDimension {
        name: raw.trim().to_string(),
        layer,
        suggestion: Dimension::nearest(raw),
    })?;
    if dim.layer() != layer {
        return Err(ProfileError::WrongLayer {
            dimension: dim,
            found: layer,
            expected: dim.layer(),
        });
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSetting {
    pub dimension: Dimension,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CulturalProfile {
    pub layers: BTreeMap<Layer, Vec<DimensionSetting>>,
}

impl CulturalProfile {
    pub fn settings(&self) -> impl Iterator<Item = &DimensionSetting> {
        self.layers.values().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.values().all(Vec::is_empty)
    }

    /// Adds or replaces a setting; the dimension picks its own layer.
    pub fn set(&mut self, dimension: Dimension, payload: impl Into<String>) {
        let entry = self.layers.entry(dimension.layer()).or_default();
        entry.retain(|s| s.dimension != dimension);
        entry.push(DimensionSetting {
            dimension,
            payload: sanitize_payload(&payload.into()),
        });
        entry.sort_by_key(|s| s.dimension);
    }
}

/// Strips control characters and caps payloads at 400 characters.
pub fn sanitize_payload(raw: &str) -> String {
    raw.chars()
        .map(|c| if c == '\n' || c == '\t' { ' ' } else { c })
        .filter(|c| !c.is_control())
        .take(PAYLOAD_CAP)
        .collect::<String>()
        .trim()
        .to_string()
}

/// Parses and validates a YAML profile document.
pub fn validate_profile(raw: &str) -> Result<CulturalProfile, ProfileError> {
    if raw.trim().is_empty() {
        return Ok(CulturalProfile::default());
    }
    let doc: Option<BTreeMap<String, Option<BTreeMap<String, Option<serde_yaml::Value>>>>> =
        serde_yaml::from_str(raw).map_err(|e| ProfileError::Parse(e.to_string()))?;
    let mut profile = CulturalProfile::default();
    for (layer_raw, dims) in doc.unwrap_or_default() {
        let layer = Layer::parse(&layer_raw).ok_or_else(|| ProfileError::UnknownLayer(layer_raw.clone()))?;
        profile.layers.entry(layer).or_default();
        for (dim_raw, value) in dims.unwrap_or_default() {
            let dimension = resolve_dimension(&dim_raw, layer)?;
            let payload = match value {
                None | Some(serde_yaml::Value::Null) => String::new(),
                Some(serde_yaml::Value::String(s)) => s,
                Some(serde_yaml::Value::Number(n)) => n.to_string(),
                Some(serde_yaml::Value::Bool(b)) => b.to_string(),
                Some(_) => return Err(ProfileError::Parse(format!("payload for {dimension} must be text"))),
            };
            let payload = sanitize_payload(&payload);
            if payload.is_empty() && dimension.requires_payload() {
                return Err(ProfileError::EmptyPayload(dimension));
            }
            profile.set(dimension, payload);
        }
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    KnowledgeBaseTag,
    PromptFragment,
    LexiconPack,
    ServiceRouting,
    FollowupPolicy,
    ModelChoice,
    VoiceOutput,
    GrammarCorrection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionDetail {
    KnowledgeBaseTag { tag: Tag },
    PromptFragment { text: String },
    LexiconPack { source: Option<String> },
    ServiceRouting { offer: String },
    FollowupPolicy { ask_about: String },
    ModelChoice { requirement: String },
    VoiceOutput,
    GrammarCorrection,
}

impl ActionDetail {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionDetail::KnowledgeBaseTag { .. } => ActionKind::KnowledgeBaseTag,
            ActionDetail::PromptFragment { .. } => ActionKind::PromptFragment,
            ActionDetail::LexiconPack { .. } => ActionKind::LexiconPack,
            ActionDetail::ServiceRouting { .. } => ActionKind::ServiceRouting,
            ActionDetail::FollowupPolicy { .. } => ActionKind::FollowupPolicy,
            ActionDetail::ModelChoice { .. } => ActionKind::ModelChoice,
            ActionDetail::VoiceOutput => ActionKind::VoiceOutput,
            ActionDetail::GrammarCorrection => ActionKind::GrammarCorrection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineAction {
    pub layer: Layer,
    pub dimension: Dimension,
    pub detail: ActionDetail,
}

impl PipelineAction {
    pub fn kind(&self) -> ActionKind {
        self.detail.kind()
    }
}

pub const RELIGION_FRAGMENT: &str = "Recognize the user's religious and communal beliefs, encourage talking to a \
religious/community leader as well as a doctor, and offer alternatives if a recommendation goes against their beliefs.";

pub const CONFLICT_FRAGMENT: &str = "If a community practice is benign, keep a neutral tone and do not question it. \
If it is harmful, present medically accurate evidence without denigrating the practice. Counter misconceptions \
gently and always suggest speaking with a community leader and a doctor.";

pub const GENDER_ROLES_FRAGMENT: &str = "Acknowledge dominant gender roles but also that they can change. The \
responsibility of family planning does not rest solely on women; it is shared by both partners. Center women's \
agency and offer strategies to negotiate decisions about their health and relationships.";

pub const REGISTER_FRAGMENT: &str = "Use a respectful and formal tone, like a medical professional. In Hinglish \
address the user as 'aap', never as 'tu'.";

fn with_context(base: &str, payload: &str) -> String {
    if payload.is_empty() {
        base.to_string()
    } else {
        format!("{base} Local context: {payload}")
    }
}

fn opt(payload: &str) -> Option<String> {
    (!payload.is_empty()).then(|| payload.to_string())
}

/// The shipped dimension → action table.
fn actions_for(dimension: Dimension, payload: &str) -> Vec<ActionDetail> {
    use ActionDetail::*;
    use Dimension as D;
    let tag = KnowledgeBaseTag { tag: Tag(dimension) };
    match dimension {
        D::MedicalConsensus | D::Diet | D::HouseholdDynamics | D::MaritalStatus => vec![tag],
        D::LawsAndRegulations => vec![
            tag,
            PromptFragment {
                text: with_context("State the legal position that applies where the user lives, such as the age of consent, instead of general ranges.", payload),
            },
        ],
        D::SpokenLanguage => vec![ModelChoice { requirement: format!("spoken language: {payload}") }],
        D::WrittenScript => vec![ModelChoice {
            requirement: format!("written script: {}", if payload.is_empty() { "transliterated Hindi (Roman script)" } else { payload }),
        }],
        D::HealthcareAccess => vec![ServiceRouting { offer: "offer teleconsultation / free or local services".into() }],
        D::CommunityDynamics => vec![
            tag,
            PromptFragment {
                text: with_context("Recognize the importance of community advice and encourage consulting a community leader, while prioritizing verified medical information.", payload),
            },
        ],
        D::CommunityBeliefs => vec![PromptFragment { text: with_context(CONFLICT_FRAGMENT, payload) }],
        D::Religion | D::CasteAndTribe => vec![
            tag,
            PromptFragment { text: with_context(&format!("{RELIGION_FRAGMENT} {CONFLICT_FRAGMENT}"), payload) },
        ],
        D::Dialect => vec![LexiconPack { source: opt(payload) }],
        D::GenderRoles => vec![PromptFragment { text: with_context(GENDER_ROLES_FRAGMENT, payload) }],
        D::PrivacyPractices => vec![PromptFragment { text: with_context(REGISTER_FRAGMENT, payload) }],
        D::Age => vec![FollowupPolicy { ask_about: "age".into() }],
        D::IncomeAndOccupation => vec![ServiceRouting {
            offer: "consider cost: suggest free government services, teleconsultation or referrals".into(),
        }],
        D::DigitalLiteracy => vec![GrammarCorrection, VoiceOutput],
        D::HealthLiteracy => vec![LexiconPack { source: opt(payload) }, tag],
        D::MedicalHistory => vec![FollowupPolicy { ask_about: "medical history".into() }],
        D::Disabilities => vec![ServiceRouting { offer: "offer accessible services like teleconsultation".into() }],
    }
}

/// Actions every profile gets, even an empty one.
fn default_actions() -> Vec<PipelineAction> {
    vec![
        PipelineAction {
            layer: Layer::Individual,
            dimension: Dimension::DigitalLiteracy,
            detail: ActionDetail::GrammarCorrection,
        },
        PipelineAction {
            layer: Layer::Individual,
            dimension: Dimension::PrivacyPractices,
            detail: ActionDetail::PromptFragment { text: REGISTER_FRAGMENT.into() },
        },
    ]
}

/// Compiles a validated profile into an ordered, de-duplicated action plan.
pub fn compile_actions(profile: &CulturalProfile) -> Vec<PipelineAction> {
    let mut out = default_actions();
    let mut settings: Vec<&DimensionSetting> = profile.settings().collect();
    settings.sort_by_key(|s| s.dimension);
    for s in settings {
        for detail in actions_for(s.dimension, &s.payload) {
            let action = PipelineAction {
                layer: s.dimension.layer(),
                dimension: s.dimension,
                detail,
            };
            if !out.contains(&action) {
                out.push(action);
            }
        }
    }
    out
}

/// Convenience views over a compiled action list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub actions: Vec<PipelineAction>,
}

impl ActionPlan {
    pub fn compile(profile: &CulturalProfile) -> Self {
        ActionPlan { actions: compile_actions(profile) }
    }

    /// Prompt text contributed by fragments and routing actions, in order.
    pub fn prompt_fragments(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in &self.actions {
            let text = match &a.detail {
                ActionDetail::PromptFragment { text } => text.clone(),
                ActionDetail::ServiceRouting { offer } => format!("When suggesting next steps, {offer}."),
                ActionDetail::FollowupPolicy { ask_about } => {
                    format!("Ask a follow-up question about the user's {ask_about} when it matters for a health symptom.")
                }
                _ => continue,
            };
            if !out.contains(&text) {
                out.push(text);
            }
        }
        out
    }

    pub fn kb_tags(&self) -> Vec<Tag> {
        let mut tags: Vec<Tag> = self
            .actions
            .iter()
            .filter_map(|a| match a.detail {
                ActionDetail::KnowledgeBaseTag { tag } => Some(tag),
                _ => None,
            })
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn lexicon_packs(&self) -> Vec<String> {
        self.actions
            .iter()
            .filter_map(|a| match &a.detail {
                ActionDetail::LexiconPack { source: Some(s) } => Some(s.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn has(&self, kind: ActionKind) -> bool {
        self.actions.iter().any(|a| a.kind() == kind)
    }

    pub fn followup_enabled(&self) -> bool {
        self.has(ActionKind::FollowupPolicy)
    }

    /// Human-readable plan, one action per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for a in &self.actions {
            let detail = match &a.detail {
                ActionDetail::KnowledgeBaseTag { tag } => format!("tag={tag}"),
                ActionDetail::PromptFragment { text } => format!("\"{text}\""),
                ActionDetail::LexiconPack { source } => format!("source={}", source.as_deref().unwrap_or("<base lexicon>")),
                ActionDetail::ServiceRouting { offer } => offer.clone(),
                ActionDetail::FollowupPolicy { ask_about } => format!("ask about {ask_about}"),
                ActionDetail::ModelChoice { requirement } => requirement.clone(),
                ActionDetail::VoiceOutput | ActionDetail::GrammarCorrection => String::new(),
            };
            out.push_str(&format!("{:<11} {:<20} {:?} {}\n", a.layer, a.dimension, a.kind(), detail).trim_end().to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_one_dimensions_over_four_layers() {
        assert_eq!(Dimension::ALL.len(), 21);
        let count = |l: Layer| Dimension::ALL.iter().filter(|d| d.layer() == l).count();
        assert_eq!(
            [count(Layer::Societal), count(Layer::Regional), count(Layer::Community), count(Layer::Individual)],
            [2, 3, 7, 9]
        );
    }

    #[test]
    fn unknown_dimension_suggests_nearest() {
        let err = validate_profile("Community:\n  Religon: x\n").unwrap_err();
        assert!(matches!(err, ProfileError::UnknownDimension { suggestion: Dimension::Religion, .. }), "{err}");
        let err = validate_profile("Community:\n  Astrology: stars\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Astrology") && msg.contains("did you mean"), "{msg}");
    }

    #[test]
    fn wrong_layer_and_empty_payload() {
        assert_eq!(
            validate_profile("Societal:\n  Religion: x\n").unwrap_err(),
            ProfileError::WrongLayer { dimension: Dimension::Religion, found: Layer::Societal, expected: Layer::Community }
        );
        assert_eq!(validate_profile("Community:\n  Dialect: \"\"\n").unwrap_err(), ProfileError::EmptyPayload(Dimension::Dialect));
        assert!(matches!(validate_profile("Planetary:\n  Age: x\n"), Err(ProfileError::UnknownLayer(_))));
    }

    #[test]
    fn display_names_are_accepted() {
        let p = validate_profile("Community:\n  Caste & Tribe: x\nIndividual:\n  (Dis)Abilities: y\n  income and occupation:\n").unwrap();
        let dims: Vec<_> = p.settings().map(|s| s.dimension).collect();
        assert_eq!(dims, [Dimension::CasteAndTribe, Dimension::IncomeAndOccupation, Dimension::Disabilities]);
    }

    #[test]
    fn empty_profile_yields_defaults_only() {
        let p = validate_profile("").unwrap();
        assert!(p.is_empty());
        assert_eq!(compile_actions(&p), default_actions());
    }

    #[test]
    fn payload_sanitized() {
        let long = "a".repeat(1000);
        assert_eq!(sanitize_payload(&long).len(), 400);
        assert_eq!(sanitize_payload("x\u{7}y\nz"), "xy z");
    }

    #[test]
    fn tag_round_trip() {
        let t: Tag = "Societal/LawsAndRegulations".parse().unwrap();
        assert_eq!(t, Tag(Dimension::LawsAndRegulations));
        assert_eq!(t.to_string(), "Societal/LawsAndRegulations");
        assert!("Regional/LawsAndRegulations".parse::<Tag>().is_err());
    }
}
