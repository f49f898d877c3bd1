from __future__ import annotations

import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes: dict[int, tuple[str, str]] = {}
_notes: dict[int, list[str]] = {}


@pytest.fixture
def note():
    """``note(n, text)`` attaches a measured value to criterion ``n``'s summary line."""
    def add(n: int, text: str) -> None:
        _notes.setdefault(n, []).append(text)
    return add


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    doc = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        prev = _outcomes.get(n)
        failed = report.outcome != "passed"
        if prev is None or prev[0] == "PASS":
            _outcomes[n] = ("FAIL" if failed else "PASS", doc)


def pytest_terminal_summary(terminalreporter) -> None:
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, 10):
        status, name = _outcomes.get(n, ("NOT RUN", f"criterion {n}"))
        tr.write_line(f"criterion {n}: {status}  ({name})")
        for text in _notes.get(n, ()):
            tr.write_line(f"    {text}")
