from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "demos" / "data"
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker.args
        _ACCEPTANCE.append((number, title, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    merged: dict[int, tuple[str, bool]] = {}
    for number, title, outcome in _ACCEPTANCE:
        ok = merged.get(number, (title, True))[1] and outcome == "passed"
        merged[number] = (title, ok)
    for number, (title, ok) in sorted(merged.items()):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {title}")


@pytest.fixture(scope="session")
def travel_text() -> str:
    return (DATA / "travel.intent").read_text()


@pytest.fixture(scope="session")
def travel_contract(travel_text):
    from intentc import compile_text

    return compile_text(travel_text)


@pytest.fixture(scope="session")
def travel_case():
    from intentc.casefile import load_case

    return load_case((DATA / "travel.case").read_text())
