//! Python bindings. Structured results cross the boundary as JSON strings
//! so the Python side can `json.loads` them without extra classes.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use chrono_tz::Tz;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use saathi_core::analytics::{report_files, Classifier};
use saathi_core::assets::LEXICON_TSV;
use saathi_core::cultural::{validate_profile, ActionPlan};
use saathi_core::generation::Policy;
use saathi_core::localization::{localize as apply_lexicon, Lexicon};
use saathi_core::model::{MessageLog, WireEnum};
use saathi_core::pipeline::{ConversationState, Engine};
use saathi_core::stack::{build_engine, StackConfig};

/// Localizes `text` with `lexicon_tsv`, or the shipped lexicon when absent.
pub fn localize_text(text: &str, lexicon_tsv: Option<&str>) -> Result<String, String> {
    let lex = Lexicon::parse_tsv(lexicon_tsv.unwrap_or(LEXICON_TSV)).map_err(|e| e.to_string())?;
    Ok(apply_lexicon(text, &lex).output_text)
}

/// Rule-based topic and question type, as wire names.
pub fn classify_query(query: &str, previous_response: Option<&str>) -> (String, String) {
    let (topic, kind) = Classifier::shipped().classify(None, query, previous_response);
    (topic.wire_name().to_string(), kind.wire_name().to_string())
}

/// Guardrail report for a draft answer, as JSON.
pub fn check_draft(draft: &str, query: &str) -> String {
    let report = Policy::shipped().guardrails.apply(draft, query);
    serde_json::to_string(&report).expect("report serializes")
}

/// Labels JSON-lines logs and renders the four report files.
pub fn analytics_report(logs_jsonl: &str, zone: &str) -> Result<BTreeMap<String, String>, String> {
    let zone: Tz = zone.parse().map_err(|e| format!("unknown time zone {zone:?}: {e}"))?;
    let mut logs = logs_jsonl
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str::<MessageLog>(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    Classifier::shipped().label_logs(None, &mut logs);
    report_files(&logs, zone).map_err(|e| e.to_string())
}

/// Validates a YAML profile and renders its action plan.
pub fn lint_profile(yaml: &str) -> Result<String, String> {
    let profile = validate_profile(yaml).map_err(|e| e.to_string())?;
    Ok(ActionPlan::compile(&profile).render())
}

/// Offline engine backed by the deterministic mock model.
#[pyclass(name = "Engine")]
struct PyEngine {
    engine: Arc<Engine>,
    sessions: Mutex<HashMap<String, ConversationState>>,
}

#[pymethods]
impl PyEngine {
    #[new]
    fn new() -> PyResult<Self> {
        let engine = build_engine(&StackConfig::mock()).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(PyEngine { engine: Arc::new(engine), sessions: Mutex::new(HashMap::new()) })
    }

    /// Returns `(conversation_id, greeting, suggested_questions)`.
    fn open_session(&self) -> (String, String, Vec<String>) {
        let (state, greeting) = self.engine.open_conversation();
        let id = state.conversation_id.as_str().to_string();
        self.sessions.lock().unwrap().insert(id.clone(), state);
        (id, greeting.text, greeting.suggested_questions)
    }

    /// Returns `(response_text, trace_json)`.
    fn send(&self, py: Python<'_>, conversation_id: &str, text: &str) -> PyResult<(String, String)> {
        let mut state = self
            .sessions
            .lock()
            .unwrap()
            .remove(conversation_id)
            .ok_or_else(|| PyKeyError::new_err(format!("no session {conversation_id:?}")))?;
        let engine = self.engine.clone();
        let (state, result) = py.detach(move || {
            let r = engine.run_turn(&mut state, text);
            (state, r)
        });
        self.sessions.lock().unwrap().insert(conversation_id.to_string(), state);
        let outcome = result.map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let trace = serde_json::to_string(&outcome.trace).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok((outcome.log.response_text, trace))
    }
}

#[pyfunction]
#[pyo3(signature = (text, lexicon_tsv=None))]
fn localize(text: &str, lexicon_tsv: Option<&str>) -> PyResult<String> {
    localize_text(text, lexicon_tsv).map_err(PyValueError::new_err)
}

#[pyfunction]
#[pyo3(signature = (query, previous_response=None))]
fn classify(query: &str, previous_response: Option<&str>) -> (String, String) {
    classify_query(query, previous_response)
}

#[pyfunction]
#[pyo3(signature = (draft, query=""))]
fn guardrail_check(draft: &str, query: &str) -> String {
    check_draft(draft, query)
}

#[pyfunction]
#[pyo3(signature = (logs_jsonl, zone="Asia/Kolkata"))]
fn analytics(logs_jsonl: &str, zone: &str) -> PyResult<BTreeMap<String, String>> {
    analytics_report(logs_jsonl, zone).map_err(PyValueError::new_err)
}

#[pyfunction]
fn profile_lint(yaml: &str) -> PyResult<String> {
    lint_profile(yaml).map_err(PyValueError::new_err)
}

#[pymodule]
fn saathi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(guardrail_check, m)?)?;
    m.add_function(wrap_pyfunction!(analytics, m)?)?;
    m.add_function(wrap_pyfunction!(profile_lint, m)?)?;
    Ok(())
}
