from __future__ import annotations

import pytest

from sigma2lab import ModelDims, cutoff_profile, solve_fast_decay


@pytest.fixture(scope="session")
def dims_small():
    return ModelDims(9, 1)


@pytest.fixture(scope="session")
def dims_large():
    return ModelDims(25, 4)


@pytest.fixture(scope="session")
def profile_small(dims_small):
    return solve_fast_decay(dims_small)


@pytest.fixture(scope="session")
def profile_large(dims_large):
    return solve_fast_decay(dims_large)


@pytest.fixture(scope="session")
def cutoff_small(dims_small):
    return cutoff_profile(dims_small)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS, line

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, (ok, detail) in RESULTS.items():
            terminalreporter.write_line(line(name, ok, detail))
