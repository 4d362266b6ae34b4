import re

import numpy as np
import pytest

from dislo.core import LINE, build_grid
from dislo.heat import Gaussian, LineHeat
from dislo.regularize import RegularizedFlux

# acceptance summary: criterion number -> (verdict, message)
ACCEPTANCE: dict = {}
_OUTCOMES: dict = {}


@pytest.fixture
def acceptance(request):
    """Record the measured numbers of an acceptance criterion."""
    m = re.search(r"criterion_(\d+)", request.node.name)
    cid = int(m.group(1))

    def record(passed, message):
        ACCEPTANCE[cid] = (bool(passed), message)

    return record


def pytest_runtest_logreport(report):
    m = re.search(r"criterion_(\d+)", report.nodeid)
    if m and report.when == "call":
        _OUTCOMES[int(m.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_OUTCOMES):
        ok, msg = ACCEPTANCE.get(cid, (False, "no measurement recorded"))
        verdict = "PASS" if ok and _OUTCOMES[cid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {cid:2d}: {msg}")


@pytest.fixture(scope="session")
def gauss_flux():
    """eps = 0.1 flux over a unit Gaussian on [-8, 8], 257 nodes."""
    grid = build_grid(-8.0, 8.0, 257, LINE)
    return RegularizedFlux(0.1, LineHeat(Gaussian(), grid))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
