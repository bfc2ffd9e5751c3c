"""Periodic orbits of ``x' = V(x)`` on the 2-torus and their rotation vectors.

Trajectories live in the universal cover (never reduced mod 1), so a
periodic orbit is detected when ``xi(T) - xi(0)`` lands on an integer
vector.  The largest ``p.Q`` over periodic orbits gives the linear growth
rate of front speeds in direction ``p``; a flow whose orbits all have
``Q = 0`` shows sublinear growth in every direction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .flows import FlowSpec, eval_stream, eval_velocity


class StagnationPoint(ValueError):
    pass


class NoReturn(RuntimeError):
    pass


@dataclass
class Trajectory:
    flow: FlowSpec
    x0: np.ndarray
    t: np.ndarray
    x: np.ndarray
    sol: object = field(repr=False, default=None)
    T_max: float = 0.0
    stream_drift: float = 0.0
    min_speed: float = 0.0
    stagnant: bool = False
    tol: float = 1e-11

    def __call__(self, t):
        if self.stagnant:
            return np.broadcast_to(self.x0, np.shape(t) + (2,)).copy()
        return self.sol(t).T

    def mean_velocity(self) -> np.ndarray:
        if self.stagnant or self.t[-1] == 0:
            return np.zeros(2)
        return (self.x[-1] - self.x[0]) / self.t[-1]


@dataclass(frozen=True)
class Orbit:
    """A closed orbit: ``displacement`` is integer, ``rotation = displacement / period``.

    Fixed points are represented with ``period = inf`` and zero rotation.
    """

    samples: np.ndarray
    period: float
    displacement: tuple[int, int]
    rotation: np.ndarray
    stream_level: float
    x0: tuple[float, float]
    closure_error: float = 0.0

    @property
    def fixed_point(self) -> bool:
        return math.isinf(self.period)

    @property
    def moving(self) -> bool:
        return self.displacement != (0, 0)

    def key(self) -> tuple:
        return (round(self.stream_level, 6), self.displacement)

    def as_dict(self) -> dict:
        return {
            "x0": list(self.x0),
            "period": self.period if not self.fixed_point else None,
            "displacement": list(self.displacement),
            "rotation": self.rotation.tolist(),
            "stream_level": self.stream_level,
            "closure_error": self.closure_error,
        }


def _rhs(flow: FlowSpec, A: float):
    def f(_t, y):
        return eval_velocity(flow, y, A)

    return f


class _Piecewise:
    """Dense output stitched from consecutive ``solve_ivp`` segments."""

    def __init__(self):
        self.ends: list[float] = []
        self.parts = []

    def append(self, t_end: float, sol) -> None:
        self.ends.append(t_end)
        self.parts.append(sol)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            k = min(int(np.searchsorted(self.ends, t)), len(self.parts) - 1)
            return self.parts[k](t)
        out = np.empty((2, t.size))
        which = np.minimum(np.searchsorted(self.ends, t), len(self.parts) - 1)
        for k in np.unique(which):
            sel = which == k
            out[:, sel] = self.parts[k](t[sel])
        return out


def integrate_orbit(
    flow: FlowSpec,
    x0,
    T_max: float,
    tol: float = 1e-11,
    A: float = 1.0,
    strict: bool = False,
    stop_at_return: bool = False,
    chunk: float = 2.0,
    detect_tol: float = 1e-8,
) -> Trajectory:
    """Integrate ``x' = A V(x)`` from ``x0`` over ``[0, T_max]`` with dense output.

    With ``stop_at_return`` the integration runs in segments of length
    ``chunk`` and stops after the first segment containing a return to
    ``x0`` (see :func:`detect_periodic`).  A starting point with
    ``|V| < 1e-12`` is a fixed point: the returned trajectory is constant
    (or :class:`StagnationPoint` is raised when ``strict``).
    """
    if flow.dimension != 2:
        raise ValueError("orbits need a 2D flow")
    x0 = np.asarray(x0, dtype=float)
    speed0 = float(np.linalg.norm(eval_velocity(flow, x0, A)))
    if speed0 < 1e-12:
        if strict:
            raise StagnationPoint(f"|V| = {speed0:.2e} at {x0.tolist()}")
        return Trajectory(flow, x0, np.array([0.0, T_max]), np.array([x0, x0]), None, T_max, 0.0, speed0, True, tol)
    dense = _Piecewise()
    ts, xs = [np.zeros(1)], [x0[None, :]]
    t0, y0 = 0.0, x0
    step = T_max if not stop_at_return else min(chunk, T_max)
    traj = None
    while t0 < T_max:
        t1 = min(T_max, t0 + step)
        sol = solve_ivp(_rhs(flow, A), (t0, t1), y0, method="DOP853", rtol=tol, atol=tol, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"orbit integration failed: {sol.message}")
        dense.append(t1, sol.sol)
        ts.append(sol.t[1:])
        xs.append(sol.y.T[1:])
        t0, y0 = t1, sol.y[:, -1]
        traj = _finish(flow, x0, np.concatenate(ts), np.vstack(xs), dense, T_max, tol, A)
        if stop_at_return and _first_return(traj, detect_tol, sol.t[0]) is not None:
            break
    return traj


def _finish(flow, x0, t, x, dense, T_max, tol, A) -> Trajectory:
    H = eval_stream(flow, x)
    drift = float(np.max(np.abs(H - H[0])))
    speeds = np.linalg.norm(eval_velocity(flow, x, A), axis=-1)
    return Trajectory(flow, x0, t, x, dense, T_max, drift, float(speeds.min()), False, tol)


def _first_return(traj: Trajectory, tol: float, t_from: float = 0.0) -> float | None:
    """Earliest ``t > t_from`` with ``xi(t) - x0`` within ``tol`` of an integer vector."""
    flow, x0 = traj.flow, traj.x0
    v0 = eval_velocity(flow, x0)
    v0 = v0 / np.linalg.norm(v0)

    def offset(t):
        d = traj(t) - x0
        return d - np.round(d)

    def crossing(t):
        return float(offset(t) @ v0)

    keep = traj.t >= t_from
    knots, pts = traj.t[keep], traj.x[keep]
    if knots.size < 2:
        return None
    # sample between solver steps finely enough to see each crossing
    counts = 8 + np.ceil(np.linalg.norm(np.diff(pts, axis=0), axis=1) / 0.05).astype(int)
    ts = np.unique(np.concatenate(
        [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(knots[:-1], knots[1:], counts)] + [knots[-1:]]
    ))
    off = offset(ts)
    s = off @ v0
    near = np.linalg.norm(off, axis=-1) < 0.25
    for k in np.nonzero((s[:-1] < 0) & (s[1:] >= 0) & near[:-1] & near[1:])[0]:
        t_star = brentq(crossing, ts[k], ts[k + 1], xtol=1e-14, rtol=1e-14)
        if np.linalg.norm(offset(t_star)) < tol:
            return float(t_star)
    return None


def detect_periodic(traj: Trajectory, tol: float = 1e-8, strict: bool = False) -> Orbit | None:
    """First return of the trajectory to ``x0`` modulo integer vectors.

    The return is bracketed on the line through ``x0`` orthogonal to
    ``V(x0)`` by sampling the dense output, then refined by root-finding on
    the signed crossing distance.  Returns ``None`` when no return closes to
    within ``tol`` before ``T_max`` (or raises :class:`NoReturn` if ``strict``).
    """
    x0 = traj.x0
    level = float(eval_stream(traj.flow, x0))
    if traj.stagnant:
        return Orbit(x0[None, :].copy(), math.inf, (0, 0), np.zeros(2), level, tuple(x0.tolist()))
    t_star = _first_return(traj, tol)
    if t_star is None:
        if strict:
            raise NoReturn(f"no return to {x0.tolist()} within T = {traj.t[-1]:g}")
        return None
    end = traj(t_star)
    disp = np.round(end - x0).astype(int)
    err = float(np.linalg.norm(end - x0 - disp))
    samples = np.vstack([traj(np.linspace(0.0, t_star, 257)[:-1]), end])
    return Orbit(samples, t_star, (int(disp[0]), int(disp[1])), disp / t_star, level, tuple(x0.tolist()), err)


def _seed_points(flow: FlowSpec, n_seeds: int, n_levels: int) -> list[np.ndarray]:
    s = (np.arange(n_seeds) + 0.5) / n_seeds
    # axis transversals sit half a seed spacing off the coordinate lines,
    # which are separatrices of the cellular family
    off = 0.5 / n_seeds
    seeds = [np.array([a, a]) for a in s]
    seeds += [np.array([a, off]) for a in s]
    seeds += [np.array([off, a]) for a in s]
    seeds += _level_seeds(flow, n_levels)
    out = []
    for x in seeds:
        if np.linalg.norm(eval_velocity(flow, x)) < 1e-6:
            x = x + 1.0 / n_seeds
        out.append(x)
    return out


def _level_seeds(flow: FlowSpec, n_levels: int, samples: int = 128) -> list[np.ndarray]:
    """One point on each of ``n_levels`` stream levels, plus the level ``H = 0``.

    Levels are found by root-finding along the segment joining the sampled
    minimum and maximum of ``H``, which crosses every level in between.
    """
    g = np.arange(samples) / samples
    X, Y = np.meshgrid(g, g, indexing="ij")
    H = eval_stream(flow, np.stack([X, Y], axis=-1))
    i_min, i_max = np.unravel_index(np.argmin(H), H.shape), np.unravel_index(np.argmax(H), H.shape)
    a = np.array([g[i_min[0]], g[i_min[1]]])
    b = np.array([g[i_max[0]], g[i_max[1]]])
    hmin, hmax = float(H.min()), float(H.max())
    if hmax - hmin < 1e-12:
        return []
    # unwrap the segment so it is the short way across the torus
    b = a + (b - a) - np.round(b - a)
    seg = lambda t: float(eval_stream(flow, a + t * (b - a)))
    ts = np.linspace(0.0, 1.0, 257)
    hs = np.array([seg(t) for t in ts])
    levels = list(np.linspace(hmin, hmax, n_levels + 2)[1:-1])
    if hmin < 0.0 < hmax:
        levels.append(0.0)
    points = []
    for c in levels:
        idx = np.nonzero((hs[:-1] - c) * (hs[1:] - c) <= 0)[0]
        if idx.size == 0:
            continue
        k = int(idx[0])
        if hs[k] == c:
            t = ts[k]
        else:
            t = brentq(lambda t: seg(t) - c, ts[k], ts[k + 1], xtol=1e-15)
        points.append(a + t * (b - a))
    return points


@dataclass
class OrbitScan:
    orbits: list[Orbit]
    seeds: int
    periodic: int
    no_return: int
    extended: int
    max_stream_drift: float
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter(self.orbits)

    def __len__(self):
        return len(self.orbits)


def _trace(flow, x0, T_max, tol, detect_tol):
    traj = integrate_orbit(flow, x0, T_max, tol, stop_at_return=True, detect_tol=detect_tol)
    orbit = detect_periodic(traj, detect_tol)
    extended = False
    # slow passages by a stagnation point need a longer horizon
    if orbit is None and not traj.stagnant and traj.min_speed < 1e-4 * 2 * np.pi:
        traj = integrate_orbit(flow, x0, 4.0 * T_max, tol, stop_at_return=True, detect_tol=detect_tol)
        orbit = detect_periodic(traj, detect_tol)
        extended = True
    return traj, orbit, extended


def scan_orbits(
    flow: FlowSpec,
    n_seeds: int = 64,
    T_max: float = 40.0,
    n_levels: int = 32,
    tol: float = 1e-11,
    detect_tol: float = 1e-8,
    workers: int = 1,
    keep_trajectories: bool = False,
) -> OrbitScan:
    """Seed, integrate and deduplicate periodic orbits.

    Seeds: ``n_seeds`` points on each of the diagonal and the two axis
    transversals, plus one point per stream level.  Orbits are keyed by
    rounded stream level and displacement, so counter-directed orbits on
    the same level are kept apart.
    """
    if flow.dimension != 2:
        raise ValueError("orbits need a 2D flow")
    seeds = _seed_points(flow, n_seeds, n_levels)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traced = list(pool.map(lambda x: _trace(flow, x, T_max, tol, detect_tol), seeds))
    else:
        traced = [_trace(flow, x, T_max, tol, detect_tol) for x in seeds]
    found: dict[tuple, Orbit] = {}
    periodic = no_return = extended = 0
    drift = 0.0
    for traj, orbit, ext in traced:
        extended += ext
        drift = max(drift, traj.stream_drift)
        if orbit is None:
            no_return += 1
            continue
        periodic += 1
        found.setdefault(orbit.key(), orbit)
    orbits = [found[k] for k in sorted(found)]
    return OrbitScan(
        orbits, len(seeds), periodic, no_return, extended, drift,
        [t for t, _, _ in traced] if keep_trajectories else [],
    )


def cp_from_orbits(orbits, p) -> float:
    """``max(0, max p.Q)`` over the given orbits."""
    p = np.asarray(p, dtype=float)
    best = 0.0
    for o in orbits:
        best = max(best, float(p @ o.rotation))
    return best


@dataclass
class BendingClassification:
    case: str
    Q: np.ndarray | None
    witnesses: list[Orbit]
    parallel: bool
    max_angle: float
    coverage: dict

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "Q": None if self.Q is None else self.Q.tolist(),
            "parallel": self.parallel,
            "max_angle": self.max_angle,
            "witnesses": [o.as_dict() for o in self.witnesses],
            "coverage": self.coverage,
        }


def _angle_mod_sign(a: np.ndarray, b: np.ndarray) -> float:
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    s = abs(float(a[0] * b[1] - a[1] * b[0])) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.atan2(s, c)


def classify_bending(flow: FlowSpec, scan: OrbitScan | None = None, **scan_kwargs) -> BendingClassification:
    """Case (ii) when some periodic orbit has a nonzero rotation vector, else case (i).

    ``Q`` is the unit common direction, signed so its first nonzero
    component is positive.  ``parallel`` asserts that all nonzero rotation
    vectors of the scan share that direction up to sign within 1e-6 rad.
    """
    if scan is None:
        scan = scan_orbits(flow, **scan_kwargs)
    moving = [o for o in scan.orbits if o.moving]
    coverage = {
        "seeds": scan.seeds,
        "periodic": scan.periodic,
        "no_return": scan.no_return,
        "extended": scan.extended,
        "distinct_orbits": len(scan.orbits),
        "max_stream_drift": scan.max_stream_drift,
    }
    if not moving:
        return BendingClassification("i", None, list(scan.orbits[:4]), True, 0.0, coverage)
    ref = moving[0].rotation / np.linalg.norm(moving[0].rotation)
    if ref[0] < 0 or (ref[0] == 0 and ref[1] < 0):
        ref = -ref
    angle = max(_angle_mod_sign(o.rotation, ref) for o in moving)
    return BendingClassification("ii", ref, moving, angle < 1e-6, angle, coverage)


def write_polylines(orbits, directory, max_orbits: int | None = None) -> list[Path]:
    """Dump orbit samples (universal-cover coordinates) as ``x1 x2`` text files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, o in enumerate(orbits[:max_orbits]):
        path = directory / f"orbit_{k:03d}.txt"
        header = f"period {o.period!r} displacement {o.displacement[0]} {o.displacement[1]} level {o.stream_level!r}"
        np.savetxt(path, o.samples, fmt="%.12e", header=header)
        paths.append(path)
    return paths
