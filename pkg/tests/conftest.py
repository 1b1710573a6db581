import os

# allow multi-thread determinism tests even on single-core machines
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import pytest  # noqa: E402

_acceptance_lines: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(criterion: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {criterion}" + (f"  ({detail})" if detail else "")
        _acceptance_lines.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
