"""Shared fixtures: acceptance-criterion reporting that survives output capture."""

import pytest

_CRITERION_LINES = []


@pytest.fixture(scope="session")
def criterion_report():
    """Record one pass/fail line per acceptance criterion.

    Lines are printed immediately (visible with -s) and replayed in the
    terminal summary so the per-criterion verdict is always in the log.
    """

    def report(num: int, ok: bool, detail: str) -> bool:
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERION_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)
