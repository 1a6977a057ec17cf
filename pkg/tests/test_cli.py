import json

import pytest

from conftest import DATA

from intentc.cli import main

DOC, CASE, EMPTY = (str(DATA / n) for n in ("travel.intent", "travel.case", "empty.intent"))
TRACE = str(DATA / "travel.trace.jsonl")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_compile_text_and_json(capsys):
    code, out, _ = run(capsys, "compile", DOC)
    assert code == 0 and "unresolved" in out
    code, out, _ = run(capsys, "compile", DOC, "--format", "json")
    data = json.loads(out)
    assert data["unresolved"] == {"semantic": [], "evidentiary": [], "procedural": [], "institutional": []}
    assert data["contracts"]["institutional"]["autonomous_if"] == "domestic && fare_delta <= 200 && same_cabin"


def test_compile_empty_document_lists_everything(capsys):
    code, out, _ = run(capsys, "compile", EMPTY, "--format", "json")
    assert code == 0
    assert len(json.loads(out)["unresolved"]["institutional"]) == 5


@pytest.mark.parametrize(
    "action, code, text",
    [
        ("hold_fare_150", 0, "inside"),
        ("purchase_250", 1, "outside: institutional"),
        ("hold_fare_international", 1, "outside: institutional"),
    ],
)
def test_check(capsys, action, code, text):
    got, out, _ = run(capsys, "check", DOC, CASE, action)
    assert got == code and out.strip() == text


def test_check_at_later_time_and_verbose(capsys):
    code, out, _ = run(capsys, "check", DOC, CASE, "hold_fare_150", "--now", "700", "-v")
    assert code == 1 and out.startswith("outside: evidentiary") and "stale" in out


def test_check_prob(capsys):
    code, out, _ = run(capsys, "check", DOC, CASE, "hold_fare_150", "--prob", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["band"] == "authorize" and data["alpha"] == 0.6


def test_route(capsys):
    code, out, _ = run(capsys, "route", DOC, CASE, "--action", "hold_fare_150")
    assert code == 0 and out.startswith("act")
    code, out, _ = run(capsys, "route", DOC, CASE, "--action", "hold_fare_international", "--format", "json")
    assert code == 1 and json.loads(out)["move"]["kind"] == "escalate"
    # Signals alone saturate below kappa = 0.25, under the 0.3 threshold.
    code, out, _ = run(capsys, "route", DOC, CASE, "--action", "hold_fare_150", "--signals", "inst=5", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["gaps"]["inst"] == pytest.approx(0.25 * 5 / 6) and data["move"]["kind"] == "act"
    code, out, _ = run(capsys, "route", DOC, CASE, "--action", "hold_fare_150", "--checker", "false")
    assert code == 0 and out.startswith("search")


def test_route_bad_signal(capsys):
    code, _, err = run(capsys, "route", DOC, CASE, "--signals", "mood=3")
    assert code == 2 and "error" in err


def test_trace(capsys):
    code, out, _ = run(capsys, "trace", TRACE, DOC, CASE, "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["t_authorized"] == 10
    assert data["weights"] == {"compile": 2, "search": 3, "escalate": 1, "wait": 4, "execute": 1}


def test_tighten(capsys):
    code, out, _ = run(capsys, "tighten", DOC, DOC, CASE)
    assert code == 0 and out.startswith("tightening")
    code, out, _ = run(capsys, "tighten", EMPTY, DOC, CASE, "--format", "json")
    assert code == 0 and json.loads(out)["tightening"] is False


def test_stability(capsys):
    code, out, _ = run(capsys, "stability", DOC, CASE, "--perturb", "identity", "clause_reorder:0:3")
    assert code == 0 and out.strip() == "stability: 1"


def test_bench_writes_report(capsys, tmp_path):
    manifest = tmp_path / "m.yaml"
    manifest.write_text("dimensions: [inst]\nagents: [NaiveExecutor]\nseeds: [0]\n")
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "bench", str(manifest), "--output", str(target))
    assert code == 0 and "NaiveExecutor" in out
    report = json.loads(target.read_text())
    assert report["cells"][0]["labels"]["misdelegation"] == 6


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["check", DOC, CASE, "no_such_action"],
        ["compile", "/no/such/file.intent"],
        ["stability", DOC, CASE, "--perturb", "melt"],
    ],
)
def test_input_errors_exit_2(capsys, argv):
    assert main(argv) == 2


def test_malformed_document_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.intent"
    bad.write_text("task: [unclosed\n")
    code, _, err = run(capsys, "compile", str(bad))
    assert code == 2 and "line" in err
