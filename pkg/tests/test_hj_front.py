import json

import numpy as np
import pytest

from frontspeed.flows import FlowSpec, FourierProfile
from frontspeed.hj_front import (
    A_OVER_LOG_A,
    DIAGONAL,
    POWER,
    BoundaryMinimum,
    Grid,
    HJProblem,
    IllConditionedFit,
    InsufficientSpan,
    NotConverged,
    cluster_nodes,
    extrapolate_cp,
    fit_growth_law,
    gamma_from_beta,
    solve_front_speed,
)

SHEAR = FlowSpec.shear(FourierProfile.sine(1.0))
CELL = FlowSpec.cellular()
CAT = FlowSpec.cats_eye(0.5)


def speed(model, p, A, flow, n=64, **kw):
    return solve_front_speed(HJProblem(model, p, A, flow), Grid(n, **kw))


@pytest.mark.parametrize("flow", [SHEAR, CELL, CAT], ids=lambda f: f.kind)
def test_no_flow(flow):
    assert speed("G", (1.0, 0.0), 0.0, flow, 32).speed == pytest.approx(1.0, abs=1e-3)
    assert speed("G", (0.6, 0.8), 0.0, flow, 32).speed == pytest.approx(1.0, abs=1e-3)
    assert speed("F", (1.0, 0.0), 0.0, flow, 32).speed == pytest.approx(1.0, abs=1e-3)


def test_no_flow_diagonal_frame():
    est = speed("G", (1.0, 0.0), 0.0, CAT, 32, frame=DIAGONAL)
    assert est.speed == pytest.approx(1.0, abs=1e-3)
    assert est.grid.period == 2.0


def test_shear_g_example():
    assert speed("G", (1.0, 0.0), 2.0, SHEAR, 128).speed == pytest.approx(3.0, rel=0.02)


def test_shear_f_example():
    assert speed("F", (0.5, 0.0), 2.0, SHEAR, 128).speed == pytest.approx(1.25, rel=0.02)


def test_record_and_series(tmp_path):
    prob = HJProblem("G", (1.0, 0.0), 1.0, SHEAR)
    est = solve_front_speed(prob, Grid(32))
    rec = est.record(prob)
    assert set(rec) == {"model", "p", "A", "grid", "speed", "slope_residual", "T_final"}
    json.dumps(rec)
    est.dump_series(tmp_path / "s.txt")
    data = np.loadtxt(tmp_path / "s.txt")
    assert data.shape[1] == 2 and np.all(np.diff(data[:, 0]) > 0)


def test_not_converged():
    with pytest.raises(NotConverged) as info:
        solve_front_speed(HJProblem("G", (1.0, 0.0), 20.0, CELL), Grid(32), T_final=0.01, tol=1e-12)
    assert info.value.args


def test_homogeneity():
    a1 = speed("G", (1.0, 0.5), 3.0, CELL)
    a2 = speed("G", (2.0, 1.0), 3.0, CELL)
    assert a2.speed == pytest.approx(2 * a1.speed, abs=2 * (a1.slope_residual + a2.slope_residual) + 1e-3 * a2.speed)


@pytest.mark.parametrize("model", ["G", "F"])
def test_convexity(model):
    p1, p2 = (1.0, 0.0), (0.0, 1.0)
    f1, f2 = speed(model, p1, 3.0, CAT), speed(model, p2, 3.0, CAT)
    fm = speed(model, (0.5, 0.5), 3.0, CAT)
    eps = f1.slope_residual + f2.slope_residual + fm.slope_residual
    assert fm.speed <= 0.5 * (f1.speed + f2.speed) + eps + 1e-3


def test_cellular_symmetry():
    base = speed("G", (1.0, 0.3), 5.0, CELL)
    for q in [(0.3, 1.0), (-1.0, 0.3), (1.0, -0.3)]:
        other = speed("G", q, 5.0, CELL)
        assert other.speed == pytest.approx(base.speed, abs=2 * (base.slope_residual + other.slope_residual) + 1e-6)


def test_viscous_models_run():
    chi = speed("ViscousG", (1.0, 0.0), 0.0, CELL, 32)
    assert chi.speed == pytest.approx(1.0, abs=1e-3)
    kap = speed("ViscousF", (1.0, 0.0), 0.0, CELL, 32)
    assert kap.speed == pytest.approx(1.0, abs=1e-3)


def test_problem_validation():
    with pytest.raises(ValueError):
        HJProblem("G", (1.0,), 1.0, CELL)
    with pytest.raises(ValueError):
        HJProblem("G", (1.0, 0.0), 1.0, CELL, viscosity=1.0)
    with pytest.raises(ValueError):
        HJProblem("Q", (1.0, 0.0), 1.0, CELL)
    with pytest.raises(ValueError):
        Grid(64, cluster=2.0, frame="skew")


def test_cluster_nodes():
    x = cluster_nodes(64, 8.0)
    assert x[0] == 0.0 and np.all(np.diff(x) > 0) and x[-1] < 1.0
    g = Grid(64, cluster=8.0)
    assert g.weights().sum() == pytest.approx(1.0)
    assert g.h < 1.0 / 64
    assert np.allclose(cluster_nodes(64, 0.0), np.arange(64) / 64)


def test_gamma_no_flow():
    est = gamma_from_beta(lambda lam: lam ** 2, 1.0, full_output=True)
    assert est.value == pytest.approx(2.0, abs=1e-6)
    assert est.lam == pytest.approx(1.0, rel=1e-2)


@pytest.mark.parametrize("fprime", [1.0, 1 / 16])
def test_gamma_from_analytic_shear_beta(fprime):
    A = 4.0
    value = gamma_from_beta(lambda lam: lam ** 2 + A * lam, fprime)
    assert value == pytest.approx(A + 2 * np.sqrt(fprime), rel=1e-6)


def test_gamma_shear_solver():
    # both f'(0) values share the cached F probes through one beta function
    cache = {}

    def beta(lam):
        if lam not in cache:
            cache[lam] = solve_front_speed(HJProblem("F", (lam, 0.0), 4.0, SHEAR), Grid(64))
        return cache[lam]

    g1 = gamma_from_beta(beta, 1.0, (0.05, 20.0), rtol=1e-2)
    g16 = gamma_from_beta(beta, 1 / 16, (0.02, 20.0), rtol=1e-2)
    assert g1 == pytest.approx(6.0, rel=0.02)
    assert g16 == pytest.approx(4.5, rel=0.02)
    assert g16 < 5.0


def test_gamma_boundary_minimum():
    with pytest.raises(BoundaryMinimum) as info:
        gamma_from_beta(lambda lam: lam ** 2, 1.0, lam_range=(2.0, 20.0))
    assert info.value.args


def test_gamma_rejects_bad_range():
    with pytest.raises(ValueError):
        gamma_from_beta(lambda lam: lam, 1.0, lam_range=(1.0, 0.5))


def test_extrapolate_cp_affine():
    fit = extrapolate_cp([(A, 2 * A + 5) for A in (50, 100, 200)])
    assert fit.cp == pytest.approx(2.0, abs=1e-12)
    assert fit.slope == pytest.approx(5.0, abs=1e-9)


def test_extrapolate_cp_shear():
    data = [(A, speed("G", (1.0, 0.0), A, SHEAR, 128).speed) for A in (4.0, 8.0, 16.0)]
    assert extrapolate_cp(data).cp == pytest.approx(1.0, rel=0.02)


def test_extrapolate_cp_errors():
    with pytest.raises(ValueError):
        extrapolate_cp([(1, 1), (2, 2)])
    with pytest.raises(IllConditionedFit):
        extrapolate_cp([(A, A * (1 + 0.5 * (-1) ** k)) for k, A in enumerate((10, 20, 40, 80))], n_fit=4)


AMPS = (50.0, 100.0, 200.0, 400.0, 800.0)


def test_fit_log_law_synthetic():
    fit = fit_growth_law([(A, 3 * A / np.log(A)) for A in AMPS], A_OVER_LOG_A)
    assert fit.constant == pytest.approx(3.0, abs=1e-12)
    assert fit.r2 > 0.999 and fit.exponent is None


def test_fit_power_law_synthetic():
    fit = fit_growth_law([(A, 2 * A ** 0.25) for A in AMPS], POWER)
    assert fit.exponent == pytest.approx(0.25, abs=1e-3)
    assert fit.constant == pytest.approx(2.0, rel=1e-9)


def test_fit_model_selection_synthetic():
    data = [(A, 3 * A / np.log(A)) for A in AMPS]
    assert fit_growth_law(data, A_OVER_LOG_A).bic < fit_growth_law(data, POWER).bic


def test_fit_insufficient_span():
    with pytest.raises(InsufficientSpan):
        fit_growth_law([(A, A) for A in (10, 20, 30, 40, 50)], POWER)
    with pytest.raises(InsufficientSpan):
        fit_growth_law([(A, A) for A in (10, 100, 1000)], POWER)
    with pytest.raises(ValueError):
        fit_growth_law([(A, A) for A in AMPS], "cubic")


def test_cellular_model_selection(cellular_g):
    fits = {law: fit_growth_law(cellular_g, law) for law in (A_OVER_LOG_A, POWER)}
    assert fits[A_OVER_LOG_A].bic < fits[POWER].bic


def test_cellular_extrapolated_cp(cellular_g):
    # the limit of s/A is 0 for cellular flow; the fit over the largest amplitudes
    # is still dominated by the A/log A decay at these amplitudes
    fit = extrapolate_cp(cellular_g, tol=1.0)
    assert fit.cp == pytest.approx(0.0, abs=0.05)


def test_cellular_self_convergence():
    p = HJProblem("G", (1.0, 0.0), 100.0, CELL)
    # clustered nodes; a uniform grid misses the separatrix layers entirely at A = 100
    coarse = solve_front_speed(p, Grid(256, cluster=8.0)).speed
    fine = solve_front_speed(p, Grid(512, cluster=8.0)).speed
    assert coarse == pytest.approx(fine, rel=0.03)
