"""Shared fixtures; collects acceptance-criterion outcomes for the summary."""

import sys
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict = {}


@pytest.fixture()
def criterion():
    """Context manager that records one acceptance criterion's outcome."""

    @contextmanager
    def _criterion(number: int, description: str):
        try:
            yield
        except Exception as exc:
            _CRITERIA[number] = (description, f"FAIL ({type(exc).__name__})")
            raise
        _CRITERIA[number] = (description, "PASS")

    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        description, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status:18s} {description}")
