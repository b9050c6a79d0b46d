import math

import pytest

from lvstage.grid import Grid

_ACCEPTANCE = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> str:
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    _ACCEPTANCE.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def grid():
    return Grid(math.pi, 81)


@pytest.fixture
def small_grid():
    return Grid(math.pi, 41)
