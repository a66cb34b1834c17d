//! The plain-Rust layer under the Python functions.

use saathi::{analytics_report, check_draft, classify_query, lint_profile, localize_text};

#[test]
fn lexicon_override_is_used() {
    let tsv = "naya shabd\tnew word\t0.8\tmedical_term\n";
    assert_eq!(localize_text("Yeh naya shabd hai.", Some(tsv)).unwrap(), "Yeh new word hai.");
    assert!(localize_text("x", Some("only-one-column\n")).is_err());
}

#[test]
fn follow_up_after_bot_question() {
    let (topic, kind) = classify_query("haan", Some("Kya aap aur jaankari chahti hain?"));
    assert_eq!((topic.as_str(), kind.as_str()), ("follow_up", "follow_up"));
}

#[test]
fn referral_keeps_test_advice_clean() {
    let v: serde_json::Value =
        serde_json::from_str(&check_draft("Please consult a Myna's Telehealth doctor, who may suggest you get a test done.", "")).unwrap();
    assert_eq!(v["passed"], true, "{v}");
}

#[test]
fn analytics_matches_core_files() {
    let files = analytics_report("", "UTC").unwrap();
    assert!(files["topics.csv"].ends_with("Total,0\n"));
}

#[test]
fn shipped_profile_lints() {
    let plan = lint_profile(saathi_core::assets::PROFILE_YAML).unwrap();
    assert!(plan.contains("ServiceRouting"));
}
