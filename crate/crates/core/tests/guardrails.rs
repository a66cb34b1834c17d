//! Guardrail rules against a hand-labelled fixture, and the pipeline's
//! regenerate-then-fallback path under a gateway that only writes bad drafts.

use std::sync::Arc;

use saathi_core::gateway::{Embedding, Gateway, GatewayError, PromptRequest, KEY_MEDICAL_ANSWER};
use saathi_core::generation::{Policy, RULE_PRESCRIPTION, RULE_TEST_ORDER};
use saathi_core::stack::{build_engine_with_gateway, shipped_mock, StackConfig};

const CASES: &str = include_str!("data/guardrail_cases.tsv");

fn cases() -> Vec<(&'static str, &'static str)> {
    CASES
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_once('\t').unwrap())
        .collect()
}

#[test]
fn fixture_is_thirty_balanced_cases() {
    let c = cases();
    assert_eq!(c.len(), 30);
    for label in ["prescription", "test_order", "clean"] {
        assert_eq!(c.iter().filter(|(l, _)| *l == label).count(), 10);
    }
}

#[test]
fn rules_agree_with_labels() {
    let g = &Policy::shipped().guardrails;
    let mut disagreements = Vec::new();
    for (label, text) in cases() {
        let report = g.apply(text, "");
        let fired: Vec<&str> = report.violations.iter().map(|v| v.rule_id.as_str()).collect();
        let ok = match label {
            "prescription" => fired.contains(&RULE_PRESCRIPTION),
            "test_order" => fired.contains(&RULE_TEST_ORDER) && !fired.contains(&RULE_PRESCRIPTION),
            _ => fired.is_empty() && report.passed,
        };
        if !ok {
            disagreements.push(format!("{label}: {text} -> {fired:?}"));
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:#?}");
}

#[test]
fn telehealth_referral_is_recognized() {
    let g = &Policy::shipped().guardrails;
    let r = g.apply("Please consult a Myna's Telehealth doctor for more advice.", "");
    assert!(r.referral_present);
}

/// Delegates to the shipped mock but answers every medical prompt with a
/// prescription.
struct PrescribingGateway(saathi_core::gateway::MockGateway);

impl Gateway for PrescribingGateway {
    fn complete(&self, req: &PromptRequest) -> Result<String, GatewayError> {
        if req.expected_envelope_key == KEY_MEDICAL_ANSWER {
            return Ok("Take Ovral-L, 2 tablets today and get an ultrasound done.".into());
        }
        self.0.complete(req)
    }

    fn embed(&self, text: &str) -> Result<Embedding, GatewayError> {
        self.0.embed(text)
    }

    fn health(&self) -> Result<(), GatewayError> {
        Ok(())
    }
}

#[test]
fn forced_failures_never_reach_the_user() {
    let gw = Arc::new(PrescribingGateway(shipped_mock()));
    let engine = build_engine_with_gateway(&StackConfig::mock(), gw).unwrap();
    let (mut state, _) = engine.open_conversation();
    for q in ["Condom Kya hota hai?", "What is a Copper-T?", "Periods late ho gaye hai kya karu?"] {
        let out = engine.run_turn(&mut state, q).unwrap();
        let t = &out.trace;
        assert!(t.guardrail_report.passed, "{q}");
        assert!(t.notes.iter().any(|n| n.contains("regenerating")), "{q}");
        assert!(t.notes.iter().any(|n| n.contains("using fallback")), "{q}");
        assert!(!out.response_text().contains("Ovral"));
        assert!(out.response_text().contains("Telehealth"));
    }
}
