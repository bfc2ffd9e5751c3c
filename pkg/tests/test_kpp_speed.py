import math

import numpy as np
import pytest

from frontspeed.flows import FlowSpec, FourierProfile
from frontspeed.hj_front import Grid
from frontspeed.kpp_speed import (
    EigenProblem,
    PecletGuard,
    VFRecord,
    assemble_operator,
    check_vf_bounds,
    kpp_front_speed,
    principal_eigenvalue,
)

CELL = FlowSpec.cellular()
SHEAR = FlowSpec.shear(FourierProfile.sine(1.0))


def _mathieu_top(q, modes=40):
    # independent oracle: largest eigenvalue of phi'' + q sin(2 pi y) phi in a Fourier basis
    k = np.arange(-modes, modes + 1)
    M = np.diag(-(2 * np.pi * k) ** 2).astype(complex)
    for i in range(len(k) - 1):
        M[i, i + 1] += q / 2j
        M[i + 1, i] -= q / 2j
    return float(np.max(np.linalg.eigvals(M).real))


@pytest.mark.parametrize("p", [(0.0, 0.0), (1.0, 0.0), (0.6, -0.8), (2.0, 1.0)])
def test_no_flow_eigenvalue(p):
    res = principal_eigenvalue(EigenProblem(p, 0.0, CELL, Grid(32)))
    assert res.eigenvalue == pytest.approx(float(np.dot(p, p)), abs=1e-8)
    assert res.min_ratio > 0.99


def test_shear_eigenvalue_matches_fourier_oracle():
    lam, A = 1.0, 8.0
    res = principal_eigenvalue(EigenProblem((lam, 0.0), A, SHEAR, Grid(128)))
    exact = lam ** 2 + _mathieu_top(lam * A)
    assert res.eigenvalue == pytest.approx(exact, rel=2e-3)
    assert res.min_ratio > 0


def test_fitted_scheme_brackets_and_agrees():
    ep = EigenProblem((1.0, 0.0), 4.0, CELL, Grid(64))
    central = principal_eigenvalue(ep).eigenvalue
    fitted = principal_eigenvalue(ep, scheme="fitted")
    assert fitted.lower <= fitted.eigenvalue <= fitted.upper
    assert fitted.eigenvalue == pytest.approx(central, rel=2e-2)


def test_operator_is_metzler_with_fitted_scheme():
    L = assemble_operator(EigenProblem((1.0, 0.5), 50.0, CELL, Grid(32)), scheme="fitted").tocoo()
    off = L.row != L.col
    assert np.all(L.data[off] >= 0)


def test_peclet_guard():
    with pytest.raises(PecletGuard):
        principal_eigenvalue(EigenProblem((1.0, 0.0), 1000.0, CELL, Grid(32)))


def test_kpp_no_flow():
    out = kpp_front_speed((1.0, 0.0), 0.0, 1.0, CELL, Grid(32), full_output=True)
    assert out.speed == pytest.approx(2.0, abs=1e-5)
    assert out.lam == pytest.approx(1.0, rel=1e-2)
    assert kpp_front_speed((1.0, 0.0), 0.0, 4.0, CELL, Grid(32)) == pytest.approx(4.0, abs=1e-4)


def test_kpp_cellular_bounds():
    out = kpp_front_speed((1.0, 0.0), 10.0, 1.0, CELL, Grid(64), full_output=True)
    kappa_e = principal_eigenvalue(EigenProblem((1.0, 0.0), 10.0, CELL, Grid(64))).eigenvalue
    assert 2.0 < out.speed <= kappa_e + 1.0 + 1e-9
    assert not out.multimodal


def test_check_vf_bounds():
    recs = [VFRecord((1.0, 0.0), A, 1.0, c, k) for A, c, k in [(10, 3.0, 5.0), (20, 3.5, 6.0)]]
    rep = check_vf_bounds(recs, cp=0.0)
    assert all(r["pass"] for r in rep["vf1"])
    assert rep["trend"][0]["trend"] == "decreasing"
    assert not rep["pass"]  # kappa/A = 0.3 is far above c_p = 0
    bad = check_vf_bounds([VFRecord((1.0, 0.0), 5.0, 1.0, 9.0, 5.0)])
    assert not bad["pass"] and math.isclose(bad["vf1"][0]["slack"], -3.0)


def test_eigenproblem_validation():
    with pytest.raises(ValueError):
        EigenProblem((1.0,), 1.0, CELL, Grid(32))
    with pytest.raises(ValueError):
        EigenProblem((1.0, 0.0), -1.0, CELL, Grid(32))


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_shear_rayleigh_bounds(lam):
    A = 4.0
    k = principal_eigenvalue(EigenProblem((lam, 0.0), A, SHEAR, Grid(64))).eigenvalue
    assert lam ** 2 <= k <= lam ** 2 + lam * A


def test_cellular_unit_direction_without_flow():
    assert principal_eigenvalue(EigenProblem((1.0, 0.0), 0.0, CELL, Grid(32))).eigenvalue == pytest.approx(1.0, abs=1e-9)


def test_convexity_in_p():
    grid = Grid(64)
    f = lambda p: principal_eigenvalue(EigenProblem(p, 10.0, FlowSpec.cats_eye(0.5), grid)).eigenvalue
    assert f((0.5, 0.5)) <= 0.5 * (f((1.0, 0.0)) + f((0.0, 1.0))) + 1e-8


def test_cellular_symmetry():
    grid = Grid(64)
    f = lambda p: principal_eigenvalue(EigenProblem(p, 10.0, CELL, grid))
    base = f((1.0, 0.3))
    for q in [(0.3, 1.0), (-1.0, 0.3), (1.0, -0.3)]:
        other = f(q)
        assert other.eigenvalue == pytest.approx(base.eigenvalue, abs=2 * (base.residual + other.residual) + 1e-8)


def test_cats_eye_bounded_across_channels():
    d = 1 / math.sqrt(2)
    grid = Grid(128)
    flow = FlowSpec.cats_eye(0.5)
    k25 = principal_eigenvalue(EigenProblem((-d, d), 25.0, flow, grid)).eigenvalue
    k200 = principal_eigenvalue(EigenProblem((-d, d), 200.0, flow, grid)).eigenvalue
    assert k200 <= 3.0 * k25


def test_shear_vf1():
    grid = Grid(64)
    for A in (1.0, 4.0):
        c = kpp_front_speed((1.0, 0.0), A, 1.0, SHEAR, grid)
        k = principal_eigenvalue(EigenProblem((1.0, 0.0), A, SHEAR, grid)).eigenvalue
        assert c <= k + 1.0 + 1e-9
