import math

import numpy as np
import pytest
from scipy.optimize import brentq

from frontspeed.flows import FlowSpec, FourierProfile, eval_stream
from frontspeed.orbits import (
    NoReturn,
    StagnationPoint,
    classify_bending,
    cp_from_orbits,
    detect_periodic,
    integrate_orbit,
    scan_orbits,
    write_polylines,
)

CELL = FlowSpec.cellular()
SHEAR = FlowSpec.shear(FourierProfile.sine(1.0))


def test_cellular_orbit_is_closed():
    traj = integrate_orbit(CELL, [0.25, 0.1], 10.0, stop_at_return=True)
    orbit = detect_periodic(traj)
    assert orbit is not None and not orbit.moving
    assert orbit.closure_error < 1e-8
    assert traj.stream_drift < 1e-9
    levels = eval_stream(CELL, orbit.samples)
    assert np.allclose(levels, orbit.stream_level, atol=1e-8)


def test_shear_orbit_moves_one_cell():
    traj = integrate_orbit(SHEAR, [0.0, 0.25], 5.0, stop_at_return=True)
    orbit = detect_periodic(traj)
    # v(1/4) = 1, so one unit cell per unit time
    assert orbit.displacement == (1, 0)
    assert orbit.period == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(orbit.rotation, [1.0, 0.0], atol=1e-8)


def test_fixed_point():
    traj = integrate_orbit(CELL, [0.25, 0.25], 5.0)
    orbit = detect_periodic(traj)
    assert orbit.fixed_point and math.isinf(orbit.period) and not orbit.moving
    with pytest.raises(StagnationPoint):
        integrate_orbit(CELL, [0.25, 0.25], 5.0, strict=True)


def test_no_return_within_horizon():
    traj = integrate_orbit(SHEAR, [0.0, 0.01], 1.0)
    assert detect_periodic(traj) is None
    with pytest.raises(NoReturn):
        detect_periodic(traj, strict=True)


def test_scan_shear_case_ii():
    cls = classify_bending(SHEAR, n_seeds=16, n_levels=8)
    assert cls.case == "ii" and cls.parallel
    assert np.allclose(cls.Q, [1.0, 0.0], atol=1e-9)


def test_scan_cats_eye_full_channels():
    flow = FlowSpec.cats_eye(1.0)
    scan = scan_orbits(flow, n_seeds=16, n_levels=8)
    cls = classify_bending(flow, scan)
    assert cls.case == "ii"
    assert np.allclose(cls.Q, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-9)
    assert all(abs(o.displacement[0]) == abs(o.displacement[1]) for o in scan if o.moving)
    cp = cp_from_orbits(scan.orbits, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert cp > 0
    assert cp_from_orbits(scan.orbits, [-1 / np.sqrt(2), 1 / np.sqrt(2)]) == pytest.approx(0.0, abs=1e-9)


def test_cp_from_orbits_empty():
    assert cp_from_orbits([], [1.0, 0.0]) == 0.0


def test_write_polylines(tmp_path):
    traj = integrate_orbit(SHEAR, [0.0, 0.25], 5.0, stop_at_return=True)
    orbit = detect_periodic(traj)
    paths = write_polylines([orbit], tmp_path)
    data = np.loadtxt(paths[0])
    assert data.shape == orbit.samples.shape
    assert paths[0].read_text().startswith("# period")


def test_rejects_1d():
    with pytest.raises(ValueError):
        scan_orbits(FlowSpec.compressible_1d(FourierProfile.sine(0.5)))


def test_cellular_inner_orbit():
    orbit = detect_periodic(integrate_orbit(CELL, [0.1, 0.1], 20.0, stop_at_return=True))
    assert orbit.displacement == (0, 0) and np.allclose(orbit.rotation, 0.0)


def test_cats_eye_channel_orbit():
    flow = FlowSpec.cats_eye(0.5)
    # a point of the zero level set between the eyes, away from the saddles
    x0 = np.array([0.6, 0.0])
    x0[1] = brentq(lambda y: float(eval_stream(flow, [x0[0], y])), 0.3, 0.5)
    orbit = detect_periodic(integrate_orbit(flow, x0, 40.0, stop_at_return=True))
    assert orbit is not None and orbit.moving
    assert abs(orbit.displacement[0]) == abs(orbit.displacement[1]) != 0
    assert orbit.displacement[0] == orbit.displacement[1]


def test_cats_eye_scan_has_both_signs(cats_eye_scan):
    moving = [o for o in cats_eye_scan if o.moving]
    signs = {int(np.sign(o.displacement[0])) for o in moving}
    assert signs == {-1, 1}
    for o in moving:
        assert o.displacement[0] == o.displacement[1]
    d = 1 / np.sqrt(2)
    assert cp_from_orbits(cats_eye_scan.orbits, [-d, d]) == pytest.approx(0.0, abs=1e-9)
    assert cats_eye_scan.max_stream_drift < 1e-6
