from __future__ import annotations

from pathlib import Path

import pytest

from tvws_backhaul import sensing
from tvws_backhaul.spectrum import build_plan

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def trained_model():
    # Same memoized model the scenarios use, so it is trained once per session.
    return sensing.default_model(0)


@pytest.fixture
def plan():
    return build_plan()


@pytest.fixture
def golden_dir():
    return GOLDEN


_REFERENCE_RUNS: dict = {}


def reference_report(name: str, oracle: bool = False):
    """Run a bundled reference scenario once per session and per classifier."""
    import dataclasses

    from tvws_backhaul.scenario import load_reference, run_scenario

    key = (name, oracle)
    if key not in _REFERENCE_RUNS:
        script = load_reference(name)
        if oracle:
            script = dataclasses.replace(
                script, sensing=dataclasses.replace(script.sensing, classifier="oracle"))
        _REFERENCE_RUNS[key] = run_scenario(script)
    return _REFERENCE_RUNS[key]


# -- acceptance summary ---------------------------------------------------

ACCEPTANCE: dict = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 12):
        title, ok, detail = ACCEPTANCE.get(n, ("not run", False, "test did not reach its check"))
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:>2}. {title}: {detail}")
