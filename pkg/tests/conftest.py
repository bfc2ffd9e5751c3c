"""Shared expensive runs and the acceptance report printed at the end of a session."""

import numpy as np
import pytest

from frontspeed.flows import FlowSpec
from frontspeed.hj_front import Grid, HJProblem, gamma_from_beta, solve_front_speed
from frontspeed.kpp_speed import EigenProblem, kpp_front_speed, principal_eigenvalue
from frontspeed.orbits import scan_orbits

CELLULAR_AMPS = (50.0, 100.0, 200.0, 400.0, 800.0)
KPP_AMPS = (0.0, 50.0, 100.0, 200.0, 400.0)

# clustered grid resolving the boundary layers of cellular flow at A <= 800
CELLULAR_GRID = Grid(128, cluster=8.0)
KPP_GRID = Grid(128)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def cellular_g():
    """G speeds on cellular flow, p = (1, 0): list of ``(A, speed)``."""
    flow = FlowSpec.cellular()
    return [(A, solve_front_speed(HJProblem("G", (1.0, 0.0), A, flow), CELLULAR_GRID).speed) for A in CELLULAR_AMPS]


@pytest.fixture(scope="session")
def cellular_gamma():
    """Flame speed ``gamma`` on cellular flow, p = (1, 0), f'(0) = 1: list of ``(A, gamma)``."""
    flow = FlowSpec.cellular()
    out = []
    for A in CELLULAR_AMPS:
        beta = lambda lam: solve_front_speed(HJProblem("F", (lam, 0.0), A, flow), CELLULAR_GRID)
        # the minimizing lambda falls from about 0.3 at A = 50 to 0.03 at A = 800
        out.append((A, gamma_from_beta(beta, 1.0, (0.005, 2.0), n_scan=9, rtol=1e-2)))
    return out


@pytest.fixture(scope="session")
def cellular_scan():
    return scan_orbits(FlowSpec.cellular())


@pytest.fixture(scope="session")
def cats_eye_scan():
    return scan_orbits(FlowSpec.cats_eye(0.5))


@pytest.fixture(scope="session")
def kpp_cellular():
    """KPP speed and ``kappa_A(e)`` on cellular flow, e = (1, 0), f'(0) = 1, keyed by A."""
    flow = FlowSpec.cellular()
    out = {}
    for A in KPP_AMPS:
        kpp = kpp_front_speed((1.0, 0.0), A, 1.0, flow, KPP_GRID, full_output=True)
        kappa = principal_eigenvalue(EigenProblem((1.0, 0.0), A, flow, KPP_GRID)).eigenvalue
        out[A] = (kpp, kappa)
    return out


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(criterion: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def relative_spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.min())
