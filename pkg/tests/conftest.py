from __future__ import annotations

import pytest


class CriterionLog:
    """Collects one status line per acceptance criterion."""

    def __init__(self) -> None:
        self.lines: dict[int, str] = {}

    def record(self, number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        self.lines[number] = line
        print(line)


_LOG_KEY = pytest.StashKey[CriterionLog]()


def pytest_configure(config):
    config.stash[_LOG_KEY] = CriterionLog()


@pytest.fixture(scope="session")
def criterion_log(request) -> CriterionLog:
    return request.config.stash[_LOG_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_LOG_KEY, None)
    if log and log.lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(log.lines):
            terminalreporter.write_line(log.lines[number])
