from __future__ import annotations

import pytest

# filled by the ``criterion`` fixture; printed at the end of the session
CRITERIA: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record ``(label, ok, detail)`` checks for the acceptance summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        CRITERIA.setdefault(label, []).append((bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(CRITERIA, key=lambda s: (int(s.split()[1].rstrip(":")), s)):
        checks = CRITERIA[label]
        ok = all(c for c, _ in checks)
        detail = "; ".join(d for _, d in checks)
        terminalreporter.write_line(f"{label} {'PASS' if ok else 'FAIL'}: {detail}")
