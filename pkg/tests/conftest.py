import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def log(criterion: str, ok: bool, detail: str):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return log


_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
