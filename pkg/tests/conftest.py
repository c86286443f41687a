from __future__ import annotations

import pytest

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_record(request):
    """Collects ``(criterion, passed, detail)`` lines for the terminal summary."""
    store = request.config.stash.setdefault(ACCEPTANCE, [])
    return store.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(ACCEPTANCE, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
