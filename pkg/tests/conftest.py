"""Shared fixtures and the acceptance summary printed at the end of a run."""

import pytest

_ACCEPTANCE = {}


class AcceptanceLog:
    def record(self, number, title, passed, detail):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} ({detail})")
