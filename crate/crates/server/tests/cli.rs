//! The `saathi` binary's offline subcommands.

use std::process::Command;

fn saathi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_saathi"))
}

#[test]
fn profile_lint_prints_plan() {
    let profile = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/assets/profile.yaml");
    let out = saathi().args(["profile", "lint", profile]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("21 setting(s)"));
    assert!(text.contains("ServiceRouting"));
    assert!(text.contains("LexiconPack"));
}

#[test]
fn profile_lint_rejects_unknown_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.yaml");
    std::fs::write(&path, "Community:\n  Dialekt: Bambaiya\n").unwrap();
    let out = saathi().args(["profile", "lint"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Dialect"));
}

#[test]
fn analytics_on_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs.jsonl");
    std::fs::write(&logs, "").unwrap();
    let report = dir.path().join("out");
    let out = saathi().args(["analytics", "--logs"]).arg(&logs).arg("--report").arg(&report).output().unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(report.join("lengths.txt")).unwrap(), "no logs\n");
    assert!(std::fs::read_to_string(report.join("topics.csv")).unwrap().ends_with("Total,0\n"));
}

#[test]
fn analytics_rejects_bad_zone() {
    let out = saathi().args(["analytics", "--logs", "x", "--report", "y", "--zone", "Mars/Base"]).output().unwrap();
    assert!(!out.status.success());
}
