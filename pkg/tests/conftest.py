from __future__ import annotations

import pytest

_LINES: list[str] = []


class Ledger:
    """Collects one verdict line per acceptance criterion."""

    def check(self, number: int, name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line


@pytest.fixture
def acceptance() -> Ledger:
    return Ledger()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
