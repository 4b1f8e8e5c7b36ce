from __future__ import annotations

import pytest

from bose2d.coefficients import GPParams, build_table
from bose2d.potentials import Potential


@pytest.fixture(scope="session")
def soft_disk():
    return Potential.soft_disk(2.0, 1.0)


@pytest.fixture(scope="session")
def tables(soft_disk):
    cache = {}

    def get(N: int, **kw):
        key = (N, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = build_table(soft_disk, GPParams(N, **kw))
        return cache[key]

    return get


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
