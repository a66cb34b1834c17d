//! Assembles an [`Engine`] from configuration files or the shipped defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use thiserror::Error;

use crate::assets;
use crate::cultural::{validate_profile, ActionPlan, CulturalProfile, ProfileError};
use crate::gateway::{FallbackGateway, Gateway, HttpGateway, HttpGatewayConfig, MockFixture, MockGateway};
use crate::generation::{Policy, PolicyError};
use crate::knowledge::{build_index, load_corpus, parse_document, KnowledgeError, DEFAULT_CHUNK_MAX, DEFAULT_OVERLAP};
use crate::localization::{merge_lexicons, Lexicon, LexiconError};
use crate::pipeline::{Clock, Engine, EngineParts, IdSource};
use crate::translation::{HintError, HintTable};

#[derive(Debug, Error)]
pub enum StackError {
    #[error("profile: {0}")]
    Profile(#[from] ProfileError),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("hints: {0}")]
    Hints(#[from] HintError),
    #[error("knowledge base: {0}")]
    Knowledge(#[from] KnowledgeError),
    #[error("mock fixture: {0}")]
    Fixture(String),
    #[error("no LLM endpoint configured; set LLM_ENDPOINT or use the mock stack")]
    NoEndpoint,
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Where each engine input comes from. `None` means the shipped default.
#[derive(Debug, Clone, Default)]
pub struct StackConfig {
    /// Use the deterministic mock gateway instead of a live provider.
    pub mock: bool,
    /// With a live provider, switch to the mock when the provider is down.
    pub mock_fallback: bool,
    /// Frozen clock and seeded identifiers.
    pub deterministic: bool,
    pub profile_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    pub policy_path: Option<PathBuf>,
    pub hints_path: Option<PathBuf>,
    pub fixture_path: Option<PathBuf>,
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).filter(|v| !v.is_empty()).map(PathBuf::from)
}

impl StackConfig {
    /// The fully offline, reproducible stack: mock model, frozen clock, seeded ids.
    pub fn mock() -> Self {
        StackConfig { mock: true, deterministic: true, ..Default::default() }
    }

    /// Reads `PROFILE_PATH`, `LEXICON_PATH`, `CORPUS_DIR`, `POLICY_PATH`,
    /// `HINTS_PATH`, `MOCK_FIXTURE` and `LLM_MOCK_FALLBACK`.
    pub fn from_env(mock: bool) -> Self {
        StackConfig {
            mock,
            mock_fallback: std::env::var("LLM_MOCK_FALLBACK").is_ok_and(|v| matches!(v.as_str(), "1" | "true" | "yes")),
            deterministic: false,
            profile_path: env_path("PROFILE_PATH"),
            lexicon_path: env_path("LEXICON_PATH"),
            corpus_dir: env_path("CORPUS_DIR"),
            policy_path: env_path("POLICY_PATH"),
            hints_path: env_path("HINTS_PATH"),
            fixture_path: env_path("MOCK_FIXTURE"),
        }
    }
}

fn read(path: &Path) -> Result<String, StackError> {
    std::fs::read_to_string(path).map_err(|source| StackError::Io { path: path.to_path_buf(), source })
}

pub fn load_profile(path: Option<&Path>) -> Result<CulturalProfile, StackError> {
    match path {
        Some(p) => Ok(validate_profile(&read(p)?)?),
        None => Ok(validate_profile(assets::PROFILE_YAML)?),
    }
}

/// The mock gateway loaded with the shipped golden fixture.
pub fn shipped_mock() -> MockGateway {
    let fixture = MockFixture::from_json(assets::MOCK_FIXTURE_JSON).expect("shipped fixture is valid");
    MockGateway::from_fixture(&fixture)
}

fn mock_gateway(cfg: &StackConfig) -> Result<MockGateway, StackError> {
    match &cfg.fixture_path {
        Some(p) => {
            let fixture = MockFixture::from_json(&read(p)?).map_err(|e| StackError::Fixture(e.to_string()))?;
            Ok(MockGateway::from_fixture(&fixture))
        }
        None => Ok(shipped_mock()),
    }
}

fn gateway(cfg: &StackConfig) -> Result<Arc<dyn Gateway>, StackError> {
    if cfg.mock {
        return Ok(Arc::new(mock_gateway(cfg)?));
    }
    let live: Arc<dyn Gateway> = Arc::new(HttpGateway::new(HttpGatewayConfig::from_env().ok_or(StackError::NoEndpoint)?));
    let fallback: Option<Arc<dyn Gateway>> = if cfg.mock_fallback { Some(Arc::new(mock_gateway(cfg)?)) } else { None };
    Ok(Arc::new(FallbackGateway::new(live, fallback)))
}

/// Base lexicon merged with any pack files the profile names. A pack
/// source is used when it is a `.tsv` path, relative to the profile file.
fn lexicon(cfg: &StackConfig, plan: &ActionPlan) -> Result<Lexicon, StackError> {
    let mut lex = match &cfg.lexicon_path {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::parse_tsv(assets::LEXICON_TSV)?,
    };
    let base_dir = cfg.profile_path.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
    for source in plan.lexicon_packs() {
        if !source.ends_with(".tsv") {
            continue;
        }
        let path = base_dir.join(&source);
        lex = merge_lexicons(&lex, &Lexicon::load(&path)?);
    }
    Ok(lex)
}

pub fn build_engine(cfg: &StackConfig) -> Result<Engine, StackError> {
    build_engine_with_gateway(cfg, gateway(cfg)?)
}

/// Like [`build_engine`] but with a caller-supplied gateway.
pub fn build_engine_with_gateway(cfg: &StackConfig, gateway: Arc<dyn Gateway>) -> Result<Engine, StackError> {
    let profile = load_profile(cfg.profile_path.as_deref())?;
    let plan = ActionPlan::compile(&profile);
    let policy = match &cfg.policy_path {
        Some(p) => Policy::load(p)?,
        None => Policy::shipped(),
    };
    let hints = match &cfg.hints_path {
        Some(p) => HintTable::load(p)?,
        None => HintTable::from_json(assets::HINTS_JSON)?,
    };
    let lexicon = lexicon(cfg, &plan)?;
    let docs = match &cfg.corpus_dir {
        Some(dir) => load_corpus(dir)?,
        None => assets::CORPUS
            .iter()
            .map(|(name, raw)| parse_document(Path::new(name), raw))
            .collect::<Result<_, _>>()?,
    };
    let index = if gateway.health().is_ok() {
        build_index(gateway.as_ref(), &docs, DEFAULT_CHUNK_MAX, DEFAULT_OVERLAP)?
    } else {
        tracing::warn!("gateway unavailable at startup; knowledge base left empty");
        crate::knowledge::KnowledgeIndex::new()
    };
    let (clock, ids) = if cfg.deterministic {
        (Clock::Frozen(Utc.with_ymd_and_hms(2024, 3, 1, 7, 30, 0).unwrap()), IdSource::seeded(0))
    } else {
        (Clock::System, IdSource::Random)
    };
    Ok(Engine::new(EngineParts {
        gateway,
        index: Arc::new(index),
        hints,
        lexicon,
        policy,
        plan,
        clock,
        ids,
    }))
}
