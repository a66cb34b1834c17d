"""Smoke test for the saathi extension module.

Build it first, for example with `maturin develop -m crates/python/Cargo.toml`,
or copy the cdylib from `cargo build -p saathi-py --features extension-module`
next to this script as `saathi.so`.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import saathi  # noqa: E402


def main() -> None:
    engine = saathi.Engine()
    conversation_id, greeting, suggestions = engine.open_session()
    assert greeting.startswith("Namaste"), greeting
    assert len(suggestions) == 3

    answer, trace_json = engine.send(conversation_id, "Condom Kya hota hai?")
    trace = json.loads(trace_json)
    assert trace["guardrail_report"]["passed"] is True
    assert trace["retrieved_chunk_ids"], trace
    assert len(answer.split()) <= 150
    print("answer:", answer)

    try:
        engine.send("missing", "hello")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown session accepted")

    assert saathi.localize("Ek swaasthya seva pradaata.") == "Ek doctor."
    assert saathi.classify("Condom Kya hota hai?")[0] == "contraceptive_methods"
    report = json.loads(saathi.guardrail_check("Take 2 tablets daily."))
    assert report["passed"] is False

    files = saathi.analytics("")
    assert sorted(files) == ["hourly.csv", "lengths.txt", "topics.csv", "types.csv"]
    assert files["topics.csv"].endswith("Total,0\n")
    assert "LexiconPack" in saathi.profile_lint('Community:\n  Dialect: "hinglish.tsv"\n')
    try:
        saathi.profile_lint("Community:\n  Dialekt: x\n")
    except ValueError as e:
        print("lint error:", e)
    else:
        raise AssertionError("unknown dimension accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
