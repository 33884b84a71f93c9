import sys

import pytest

from spduff.analysis import run_sweep
from spduff.energy import make_context
from spduff.manifold import analysis_manifold, build_charts, build_manifold
from spduff.problem import builtin


@pytest.fixture(scope="session")
def d0():
    return builtin("D0")


@pytest.fixture(scope="session")
def d1():
    return builtin("D1")


@pytest.fixture(scope="session")
def d2():
    return builtin("D2")


@pytest.fixture(scope="session")
def mani0(d0):
    return analysis_manifold(d0)


@pytest.fixture(scope="session")
def mani1(d1):
    return build_manifold(d1)


@pytest.fixture(scope="session")
def mani2(d2):
    return build_manifold(d2)


@pytest.fixture(scope="session")
def charts1(mani1):
    return build_charts(mani1)


@pytest.fixture(scope="session")
def ctx1(d1):
    return make_context(d1, 0.05)


@pytest.fixture(scope="session")
def ctx0(d0):
    return make_context(d0, 0.05)


@pytest.fixture(scope="session")
def sweeps(d0, d1, d2):
    """Default-grid sweeps of the three builtins, computed once per session."""
    return {p.name: run_sweep(p) for p in (d0, d1, d2)}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
