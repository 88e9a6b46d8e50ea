from __future__ import annotations

from pathlib import Path

import pytest

from curaflow.llm import MockBackend
from curaflow.model import CostLedger

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def mock(*rules, default=None, seed=0) -> MockBackend:
    """A mock backend from rule dicts."""
    return MockBackend.from_dict({"rules": list(rules), "default": default}, seed=seed)


@pytest.fixture
def ledger() -> CostLedger:
    return CostLedger()


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


# acceptance criteria outcomes, printed after the run: number -> (title, passed, seconds, note)
ACCEPTANCE: dict[int, tuple[str, bool, float, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, secs, note = ACCEPTANCE[n]
        extra = f" ({note})" if note else ""
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {title} [{secs:.2f}s]{extra}")
