"""Shared test plumbing: acceptance checks announce one verdict line each."""

import pytest

_acceptance_lines: list[str] = []


def acceptance_check(name: str, ok: bool, detail: str) -> None:
    """Record a one-line verdict for the terminal summary, then assert."""
    verdict = "PASS" if ok else "FAIL"
    _acceptance_lines.append(f"[{verdict}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture
def check():
    return acceptance_check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)
