import numpy as np
import pytest

from frontspeed.flows import (
    FlowSpec,
    FourierProfile,
    NoStreamFunction,
    ValidationFailure,
    eval_jacobian,
    eval_stream,
    eval_velocity,
    load_flow,
    max_abs_components,
    validate,
    velocity_sample,
)

SHEAR = FlowSpec.shear(FourierProfile.sine(1.0))
CELL = FlowSpec.cellular()
CAT = FlowSpec.cats_eye(0.5)
FLOWS_2D = [SHEAR, CELL, CAT, FlowSpec.fourier_stream([((1, 2), 0.7, 0.3), ((2, -1), 0.2, 1.1)])]


def test_velocity_examples():
    assert np.allclose(eval_velocity(CELL, [0.25, 0.25], 1.0), [0.0, 0.0], atol=1e-14)
    assert np.allclose(eval_velocity(CAT, [0.0, 0.0], 3.0), [0.0, 0.0], atol=1e-14)
    assert np.allclose(eval_velocity(SHEAR, [0.3, 0.25], 2.0), [2.0, 0.0], atol=1e-14)


def test_stream_examples():
    assert eval_stream(CELL, [0.25, 0.25]) == pytest.approx(1.0)
    for d in (0.0, 0.3, 1.0):
        assert eval_stream(FlowSpec.cats_eye(d), [0.0, 0.0]) == pytest.approx(d)
    y = np.linspace(0, 1, 11)
    assert np.allclose(eval_stream(CELL, np.stack([np.zeros_like(y), y], -1)), 0.0, atol=1e-15)


def test_no_stream_function_in_1d():
    flow = FlowSpec.compressible_1d(FourierProfile.sine(0.5))
    with pytest.raises(NoStreamFunction):
        eval_stream(flow, [0.1])


@pytest.mark.parametrize("flow", FLOWS_2D, ids=lambda f: f.kind)
def test_periodicity(flow):
    rng = np.random.default_rng(1)
    x = rng.random((50, 2))
    k = rng.integers(-3, 4, size=(50, 2))
    assert np.allclose(eval_velocity(flow, x + k, 1.7), eval_velocity(flow, x, 1.7), atol=1e-12)


@pytest.mark.parametrize("flow", FLOWS_2D, ids=lambda f: f.kind)
def test_stream_consistency_second_order(flow):
    x = np.random.default_rng(2).random((20, 2))
    errs = []
    for h in (1e-3, 5e-4):
        e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
        Hx = (eval_stream(flow, x + e1) - eval_stream(flow, x - e1)) / (2 * h)
        Hy = (eval_stream(flow, x + e2) - eval_stream(flow, x - e2)) / (2 * h)
        errs.append(np.max(np.abs(np.stack([-Hy, Hx], -1) - eval_velocity(flow, x))))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 3.0


@pytest.mark.parametrize("flow", FLOWS_2D, ids=lambda f: f.kind)
def test_jacobian_consistency(flow):
    x = np.random.default_rng(3).random((20, 2))
    J = eval_jacobian(flow, x, 2.0)
    h = 1e-5
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (eval_velocity(flow, x + e, 2.0) - eval_velocity(flow, x - e, 2.0)) / (2 * h)
        assert np.allclose(J[..., :, j], fd, atol=1e-6)
    s = velocity_sample(flow, x[0], 2.0)
    assert np.allclose(s.jacobian, J[0])


def test_jacobian_1d():
    v = FourierProfile.sine(0.5)
    flow = FlowSpec.compressible_1d(v)
    x = np.array([0.1, 0.4])
    assert np.allclose(eval_jacobian(flow, x, 2.0)[..., 0, 0], 2.0 * 0.5 * 2 * np.pi * np.cos(2 * np.pi * x))
    assert np.allclose(eval_velocity(flow, x, 2.0), np.sin(2 * np.pi * x))


def test_validate_examples():
    for flow in (CELL, SHEAR, CAT):
        report = validate(flow, tol=1e-10, samples=64)
        assert report.mean_zero and report.div_free
    drift = FlowSpec.fourier_stream([((0, 0), 0.5, 0.0), ((1, 1), 1.0, 0.0)])
    report = validate(drift)
    assert not report.mean_zero and report.div_free
    with pytest.raises(ValidationFailure) as info:
        validate(drift, strict=True)
    assert info.value.report.mean_residual == pytest.approx(0.5)
    with pytest.raises(ValueError):
        validate(CELL, tol=0)


def test_profile_algebra():
    v = FourierProfile.parse("1 0 1; 3 0.2 -0.1")
    y = np.linspace(0, 1, 7)
    expected = np.sin(2 * np.pi * y) + 0.2 * np.cos(6 * np.pi * y) - 0.1 * np.sin(6 * np.pi * y)
    assert np.allclose(v(y), expected)
    assert FourierProfile.parse(v.format()) == v
    assert np.allclose(v.derivative()(y), v.deriv(y))
    assert v.mean == 0.0 and not v.is_constant
    vmin, amin, vmax, amax = FourierProfile.sine(2.0).extrema()
    assert (vmin, vmax) == (pytest.approx(-2.0), pytest.approx(2.0))
    assert amax == pytest.approx(0.25, abs=1e-8)
    assert (v + v.scaled(-1.0)).is_constant or np.allclose((v + v.scaled(-1.0))(y), 0.0)


def test_max_abs_components():
    assert np.allclose(max_abs_components(SHEAR), [1.0, 0.0], atol=1e-12)
    assert np.allclose(max_abs_components(CELL), [2 * np.pi, 2 * np.pi], rtol=1e-6)


def test_load_flow(tmp_path):
    path = tmp_path / "flow.ini"
    path.write_text("[flow]\nkind = cats_eye\ndelta = 0.25\n", encoding="utf-8")
    assert load_flow(path) == FlowSpec.cats_eye(0.25)
    path.write_text("[flow]\nkind = shear\nprofile = 1 0 1; 2 0.5 0\n", encoding="utf-8")
    flow = load_flow(path)
    assert flow.kind == "shear" and len(flow.profile.terms) == 2
    path.write_text("[flow]\nkind = fourier_stream\nmodes = 1 1 1.0 0.0; 0 0 0.2 0.0\n", encoding="utf-8")
    assert len(load_flow(path).modes) == 2
    path.write_text("[other]\nkind = cellular\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_flow(path)


def test_flowspec_invariants():
    with pytest.raises(ValueError):
        FlowSpec.cats_eye(1.5)
    with pytest.raises(ValueError):
        FlowSpec("shear")
    assert CAT.dimension == 2 and FlowSpec.compressible_1d(FourierProfile.sine()).dimension == 1
    with pytest.raises(ValueError):
        eval_velocity(CELL, [0.1, 0.1], -1.0)
