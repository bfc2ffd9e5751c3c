"""Large-time front speeds from periodic Hamilton-Jacobi time marching.

Writing ``G(x, t) = p.x + u(x, t)`` with periodic ``u`` and ``u(x, 0) = 0``,
the solver evolves

    u_t + Ham(p + Du, x) = d * Lap(u)

with ``Ham(q, x) = |q| + A V(x).q`` (G models) or ``|q|^2 + A V(x).q``
(F models) and reports ``-d(mean u)/dt`` at large time.  The same module
hosts the post-processing used for A-sweeps: the inf over ``lambda`` that
turns F speeds into ``gamma``, affine extrapolation of ``s/A`` and
growth-law fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .flows import FlowSpec, eval_velocity, max_abs_components, velocity_on_grid

G = "G"
F = "F"
VISCOUS_G = "ViscousG"
VISCOUS_F = "ViscousF"
MODELS = (G, F, VISCOUS_G, VISCOUS_F)

AXIS = "axis"
DIAGONAL = "diagonal"
FRAMES = (AXIS, DIAGONAL)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class NotConverged(RuntimeError):
    """The windowed slope did not settle; ``estimate`` holds the last value."""

    def __init__(self, message: str, estimate: "FrontSpeedEstimate | None" = None):
        super().__init__(message)
        self.estimate = estimate


class UnstableBlowup(RuntimeError):
    pass


class BoundaryMinimum(RuntimeError):
    """The minimizing ``lambda`` sits on an end of the search range."""

    def __init__(self, message: str, lam: float, value: float):
        super().__init__(message)
        self.lam = lam
        self.value = value


class IllConditionedFit(RuntimeError):
    pass


class InsufficientSpan(ValueError):
    pass


def _as_vector(p) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1 or arr.size not in (1, 2):
        raise ValueError(f"direction must be a 1- or 2-vector, got {p!r}")
    return tuple(float(c) for c in arr)


@dataclass(frozen=True)
class HJProblem:
    """One effective-Hamiltonian evaluation.

    ``viscosity`` defaults to 0 for the inviscid models and 1 for the viscous
    ones.  ``reaction_slope`` is carried along for the conversion from F
    speeds to ``gamma`` and does not enter the PDE.
    """

    model: str
    p: tuple[float, ...]
    A: float
    flow: FlowSpec
    viscosity: float | None = None
    reaction_slope: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        p = _as_vector(self.p)
        if len(p) != self.flow.dimension:
            raise ValueError(f"direction has {len(p)} components, flow is {self.flow.dimension}D")
        object.__setattr__(self, "p", p)
        if self.A < 0:
            raise ValueError("amplitude must be non-negative")
        viscous = self.model in (VISCOUS_G, VISCOUS_F)
        d = (1.0 if viscous else 0.0) if self.viscosity is None else float(self.viscosity)
        if viscous and d <= 0:
            raise ValueError(f"{self.model} needs a positive viscosity")
        if not viscous and d != 0:
            raise ValueError(f"{self.model} is inviscid; viscosity must be 0")
        object.__setattr__(self, "viscosity", d)
        if self.reaction_slope <= 0:
            raise ValueError("reaction slope must be positive")

    @property
    def quadratic(self) -> bool:
        return self.model in (F, VISCOUS_F)

    @property
    def p_norm(self) -> float:
        return float(np.linalg.norm(self.p))

    def with_direction(self, p) -> "HJProblem":
        return HJProblem(self.model, tuple(p), self.A, self.flow, self.viscosity, self.reaction_slope)

    def with_amplitude(self, A: float) -> "HJProblem":
        return HJProblem(self.model, self.p, A, self.flow, self.viscosity, self.reaction_slope)


def cluster_nodes(n: int, stretch: float) -> np.ndarray:
    """Nodes on [0, 1) refined geometrically toward 0 and 1/2.

    Each quarter of the period is mapped through ``sinh`` so that spacing
    shrinks toward the lines ``x = 0`` and ``x = 1/2``, where the cellular
    separatrices and saddle points sit.  ``stretch = 0`` gives uniform nodes.
    """
    if stretch == 0.0:
        return np.arange(n) / n
    if n % 4:
        raise ValueError("a clustered grid needs n divisible by 4")
    m = n // 4
    k = np.arange(m + 1)
    seg = 0.25 * np.sinh(stretch * k / m) / np.sinh(stretch)
    half = np.concatenate([seg[:-1], 0.5 - seg[::-1][:-1]])
    return np.concatenate([half, 0.5 + half])


@dataclass(frozen=True)
class Grid:
    """Periodic tensor grid on the unit cell.

    ``cluster`` > 0 switches from uniform spacing to the sinh-refined nodes
    of :func:`cluster_nodes` (same map on every axis).

    ``frame = "diagonal"`` (2D only) places the grid axes along ``(1, 1)``
    and ``(-1, 1)``: the solver works in ``y = (x1 + x2, x2 - x1)``, in which
    the unit-cell lattice contains ``2 Z^2``, so the computational cell is
    ``[0, 2)^2`` and holds two copies of the unit cell.  Flows whose open
    channels run diagonally then advect along grid lines instead of across
    them, which removes most of the cross-stream numerical diffusion.
    """

    n: int
    dim: int = 2
    cluster: float = 0.0
    frame: str = AXIS

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 cells per axis")
        if self.dim not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if self.cluster < 0:
            raise ValueError("cluster stretch must be non-negative")
        if self.cluster and self.n % 4:
            raise ValueError("a clustered grid needs n divisible by 4")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        if self.frame == DIAGONAL and self.dim != 2:
            raise ValueError("the diagonal frame needs a 2D grid")

    @property
    def uniform(self) -> bool:
        return self.cluster == 0.0

    @property
    def h(self) -> float:
        """Smallest spacing (equals 1/n on a uniform grid)."""
        return float(self.spacing()[0].min())

    @property
    def period(self) -> float:
        """Length of the computational cell along each grid axis."""
        return 2.0 if self.frame == DIAGONAL else 1.0

    def nodes(self) -> np.ndarray:
        return self.period * cluster_nodes(self.n, self.cluster)

    def spacing(self) -> tuple[np.ndarray, np.ndarray]:
        """Forward and backward periodic spacings at every node."""
        x = self.nodes()
        hp = np.roll(x, -1) - x
        hp[-1] += self.period
        return hp, np.roll(hp, 1)

    def weights(self) -> np.ndarray:
        """Quadrature weights summing to one along each axis."""
        hp, hm = self.spacing()
        return 0.5 * (hp + hm) / self.period

    def label(self) -> str:
        base = f"{self.n}^{self.dim}" if self.dim == 2 else f"{self.n}"
        opts = []
        if not self.uniform:
            opts.append(f"cluster={self.cluster:g}")
        if self.frame != AXIS:
            opts.append(f"frame={self.frame}")
        return f"{base}({','.join(opts)})" if opts else base

    def as_dict(self) -> dict:
        return {"n": self.n, "dim": self.dim, "cluster": self.cluster, "frame": self.frame}


@dataclass
class FrontSpeedEstimate:
    speed: float
    slope_residual: float
    T_final: float
    cfl_used: float
    grid: Grid
    window: float = 0.0
    steps: int = 0
    dt_min: float = 0.0
    converged: bool = True
    times: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    means: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def __post_init__(self):
        if self.slope_residual < 0:
            raise ValueError("slope residual must be non-negative")

    def record(self, prob: HJProblem) -> dict:
        return {
            "model": prob.model,
            "p": list(prob.p),
            "A": prob.A,
            "grid": self.grid.label(),
            "speed": self.speed,
            "slope_residual": self.slope_residual,
            "T_final": self.T_final,
        }

    def dump_series(self, path) -> None:
        """Write ``t  mean(u)`` pairs as two-column text."""
        np.savetxt(path, np.column_stack([self.times, self.means]), fmt="%.12e", header="t mean_u")


def default_T_final(A: float, p) -> float:
    """Turnover-scaled horizon ``max(20, 200/A)(1 + |p|)``."""
    base = 20.0 if A <= 0 else max(20.0, 200.0 / A)
    return base * (1.0 + float(np.linalg.norm(p)))


def _window_slopes(times: np.ndarray, means: np.ndarray) -> np.ndarray:
    return -np.diff(means) / np.diff(times)


class _Marcher:
    """Owns the buffers of one solve and records ``mean u`` at requested times."""

    def __init__(self, prob: HJProblem, grid: Grid, cfl: float):
        if grid.dim != prob.flow.dimension:
            raise ValueError(f"grid is {grid.dim}D but flow is {prob.flow.dimension}D")
        self.prob = prob
        self.grid = grid
        self.cfl = cfl
        x = grid.nodes()
        hp, hm = grid.spacing()
        w = grid.weights()
        self.sig = 1.0
        if grid.frame == DIAGONAL:
            # y = M x with M = [[1, 1], [-1, 1]]: velocity M V, slope M^-T p
            y1, y2 = np.meshgrid(x, x, indexing="ij")
            V = eval_velocity(prob.flow, np.stack([(y1 - y2) / 2, (y1 + y2) / 2], axis=-1), prob.A)
            vx, vy = V[..., 0] + V[..., 1], V[..., 1] - V[..., 0]
            self.h = (hp, hm, hp, hm)
            self.w = (w, w)
            px, py = (prob.p[0] + prob.p[1]) / 2, (prob.p[1] - prob.p[0]) / 2
            self.sig = math.sqrt(2.0)
        elif grid.dim == 2:
            vx, vy = velocity_on_grid(prob.flow, [x, x], prob.A)
            self.h = (hp, hm, hp, hm)
            self.w = (w, w)
            px, py = prob.p
        else:
            (v,) = velocity_on_grid(prob.flow, [x], prob.A)
            vx, vy = v[:, None].copy(), np.zeros((grid.n, 1))
            inf = np.array([np.inf])
            self.h = (hp, hm, inf, inf)
            self.w = (w, np.ones(1))
            px, py = prob.p[0], 0.0
        self.v = (np.ascontiguousarray(vx), np.ascontiguousarray(vy))
        self.pq = (float(px), float(py))
        self.u = np.zeros_like(self.v[0])
        self.t = 0.0
        self.steps = 0
        self.dt_min = np.inf
        vmax = float(np.max(max_abs_components(prob.flow))) * prob.A
        self.guard = 1e6 * (1.0 + prob.p_norm) ** 2 * (1.0 + vmax) ** 2
        self.times = [0.0]
        self.means = [0.0]

    def march_to(self, t_end: float) -> float:
        p = self.prob
        t, steps, dt_min, _ = _kernels.advance(
            self.u, self.v[0], self.v[1], self.pq[0], self.pq[1], *self.h,
            p.quadratic, self.sig, p.viscosity, self.cfl, 0.4, self.t, t_end, 2**62,
        )
        self.t = t_end if abs(t - t_end) <= 1e-12 * max(1.0, t_end) else t
        self.steps += steps
        self.dt_min = min(self.dt_min, dt_min)
        size = float(np.max(np.abs(self.u)))
        if not math.isfinite(size) or size > self.guard * (1.0 + self.t):
            raise UnstableBlowup(f"max|u| = {size:.3e} at t = {self.t:.4g} exceeds the growth guard")
        m = float(_kernels.weighted_mean(self.u, *self.w))
        self.times.append(self.t)
        self.means.append(m)
        return m

    def estimate(self, T: float, window: float, converged: bool) -> FrontSpeedEstimate:
        times = np.array(self.times)
        means = np.array(self.means)
        # the last five records are the sub-window boundaries of [T - window, T]
        sub_t, sub_m = times[-5:], means[-5:]
        slopes = _window_slopes(sub_t, sub_m)
        speed = -(sub_m[-1] - sub_m[0]) / (sub_t[-1] - sub_t[0])
        return FrontSpeedEstimate(
            speed=float(speed),
            slope_residual=float(np.std(slopes)),
            T_final=float(T),
            cfl_used=self.cfl,
            grid=self.grid,
            window=float(window),
            steps=self.steps,
            dt_min=float(self.dt_min),
            converged=converged,
            times=times,
            means=means,
        )

    def record_window(self, T: float, window: float) -> None:
        start = T - window
        if start > self.t + 1e-14:
            self.march_to(start)
        for k in range(1, 5):
            self.march_to(start + k * window / 4.0)


def solve_front_speed(
    prob: HJProblem,
    grid: Grid,
    T_final: float | None = None,
    window: float | None = None,
    tol: float | None = 2e-3,
    cfl: float = 0.5,
    adaptive: bool | None = None,
    T_start: float | None = None,
    confirm: int = 2,
) -> FrontSpeedEstimate:
    """Estimate ``s(p) = -lim u(x, T)/T`` by explicit monotone time marching.

    With ``T_final`` given, the solution is marched to ``T_final`` and the
    slope of the cell mean over the last ``window`` (default ``T_final/4``)
    is returned; ``tol`` (relative to ``max(1, |speed|)``) then only decides
    whether :class:`NotConverged` is raised.

    Without ``T_final`` the horizon is chosen adaptively: checkpoints grow
    by 4/3 with ``window = t/4`` (so each window starts at the previous
    checkpoint) until ``confirm + 1`` consecutive windowed speeds agree
    and the sub-window spread is within ``tol``.  A single agreeing pair
    can be a coincidence of an oscillating transient.  The turnover-scaled default
    horizon caps the search.
    """
    if cfl <= 0 or cfl > 0.5:
        raise ValueError("cfl must lie in (0, 0.5]")
    if confirm < 1:
        raise ValueError("confirm must be at least 1")
    if adaptive is None:
        adaptive = T_final is None
    march = _Marcher(prob, grid, cfl)
    scale = lambda s: max(1.0, abs(s))

    if not adaptive:
        T = default_T_final(prob.A, prob.p) if T_final is None else float(T_final)
        W = T / 4.0 if window is None else float(window)
        if not 0 < W <= T:
            raise ValueError("window must lie in (0, T_final]")
        march.record_window(T, W)
        est = march.estimate(T, W, True)
        if tol is not None and est.slope_residual > tol * scale(est.speed):
            est.converged = False
            raise NotConverged(
                f"slope residual {est.slope_residual:.3e} above tolerance after T = {T:.4g}", est
            )
        return est

    if tol is None:
        raise ValueError("adaptive horizon needs a tolerance")
    cap = default_T_final(prob.A, prob.p) if T_final is None else float(T_final)
    vmax = float(np.max(max_abs_components(prob.flow))) * prob.A
    t = T_start if T_start is not None else min(0.75 * cap, 2.0 / (1.0 + prob.p_norm + vmax))
    history: list[float] = []
    while True:
        march.record_window(t, t / 4.0)
        est = march.estimate(t, t / 4.0, False)
        s = est.speed
        history.append(s)
        recent = history[-(confirm + 1):]
        if (
            len(recent) == confirm + 1
            and est.slope_residual <= tol * scale(s)
            and max(recent) - min(recent) <= tol * scale(s)
        ):
            est.converged = True
            return est
        if t * 4.0 / 3.0 > cap:
            raise NotConverged(f"speed still drifting at T = {t:.4g} (horizon cap {cap:.4g})", est)
        t *= 4.0 / 3.0


def golden_log_search(f: Callable[[float], float], a: float, b: float, rtol: float) -> float:
    """Golden-section minimization of ``f`` on ``[a, b]`` in ``log(lambda)``.

    Stops once the bracket's relative width ``b/a - 1`` is below ``rtol`` and
    returns the best abscissa probed.
    """
    la, lb = math.log(a), math.log(b)
    lc, ld = lb - GOLDEN * (lb - la), la + GOLDEN * (lb - la)
    fc, fd = f(math.exp(lc)), f(math.exp(ld))
    while lb - la > math.log1p(rtol):
        if fc <= fd:
            lb, ld, fd = ld, lc, fc
            lc = lb - GOLDEN * (lb - la)
            fc = f(math.exp(lc))
        else:
            la, lc, fc = lc, ld, fd
            ld = la + GOLDEN * (lb - la)
            fd = f(math.exp(ld))
    return math.exp(lc) if fc <= fd else math.exp(ld)


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    lam: float
    beta: float
    beta_residual: float
    evaluations: int
    scan: tuple[tuple[float, float], ...]


def gamma_from_beta(
    beta_at: Callable[[float], float | FrontSpeedEstimate],
    fprime: float,
    lam_range: tuple[float, float] = (0.02, 20.0),
    n_scan: int = 9,
    rtol: float = 1e-3,
    full_output: bool = False,
):
    """``inf_{lam > 0} (f'(0) + beta(lam p)) / lam`` by scan plus golden section.

    ``beta_at`` may return a bare float or a :class:`FrontSpeedEstimate`
    (whose residual is then carried into the result).  Evaluations are
    cached, so repeated probes cost nothing.
    """
    lo, hi = map(float, lam_range)
    if not 0 < lo < hi:
        raise ValueError("lambda range must be positive and increasing")
    if fprime <= 0:
        raise ValueError("f'(0) must be positive")
    cache: dict[float, tuple[float, float]] = {}

    def quotient(lam: float) -> float:
        if lam not in cache:
            b = beta_at(lam)
            speed, res = (b.speed, b.slope_residual) if isinstance(b, FrontSpeedEstimate) else (float(b), 0.0)
            cache[lam] = (speed, res)
        return (fprime + cache[lam][0]) / lam

    grid = np.geomspace(lo, hi, n_scan)
    vals = np.array([quotient(float(l)) for l in grid])
    k = int(np.argmin(vals))
    if k == 0 or k == n_scan - 1:
        raise BoundaryMinimum(
            f"minimum at lambda = {grid[k]:.4g}, an end of [{lo:g}, {hi:g}]", float(grid[k]), float(vals[k])
        )
    golden_log_search(quotient, float(grid[k - 1]), float(grid[k + 1]), rtol)
    best = min(cache, key=quotient)
    value = quotient(best)
    if not full_output:
        return value
    beta, res = cache[best]
    scan = tuple((float(l), quotient(float(l))) for l in grid)
    return GammaEstimate(value, best, beta, res, len(cache), scan)


@dataclass(frozen=True)
class CpFit:
    cp: float
    slope: float
    residual: float
    amplitudes: tuple[float, ...]


def extrapolate_cp(speeds: Sequence[tuple[float, float]], n_fit: int = 3, tol: float = 0.02) -> CpFit:
    """Fit ``s/A = c_p + b/A`` over the ``n_fit`` largest amplitudes.

    ``residual`` is the RMS misfit of ``s/A`` divided by ``max(|c_p|, 1e-2)``;
    :class:`IllConditionedFit` is raised when it exceeds ``tol``.
    """
    data = sorted((float(a), float(s)) for a, s in speeds)
    amps = [a for a, _ in data]
    if len(data) < 3:
        raise ValueError("need at least three amplitudes")
    if any(a <= 0 for a in amps) or len(set(amps)) != len(amps):
        raise ValueError("amplitudes must be positive and distinct")
    use = data[-max(3, min(n_fit, len(data))):]
    A = np.array([a for a, _ in use])
    y = np.array([s for _, s in use]) / A
    X = np.column_stack([np.ones_like(A), 1.0 / A])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rms = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    rel = rms / max(abs(coef[0]), 1e-2)
    fit = CpFit(float(coef[0]), float(coef[1]), rel, tuple(A.tolist()))
    if rel > tol:
        raise IllConditionedFit(f"affine fit of s/A in 1/A has relative residual {rel:.3e} > {tol:g}")
    return fit


A_OVER_LOG_A = "A_over_logA"
POWER = "power"


@dataclass(frozen=True)
class GrowthFit:
    law: str
    constant: float
    exponent: float | None
    r2: float
    bic: float
    n: int

    def as_dict(self) -> dict:
        return {"law": self.law, "constant": self.constant, "exponent": self.exponent, "r2": self.r2, "bic": self.bic}


def _r2(y: np.ndarray, yhat: np.ndarray) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


def fit_growth_law(
    speeds: Sequence[tuple[float, float]],
    law: str,
    min_points: int = 5,
    min_span: float = 10.0,
) -> GrowthFit:
    """Least-squares fit of ``s = C A / log A`` or ``s = C A^q``.

    The ``A/log A`` law is linear in ``C`` and fitted directly; the power law
    is fitted on ``log s`` against ``log A``.  ``r2`` is measured on ``s``
    itself for both so the numbers are comparable, and ``bic`` (Gaussian
    errors, one or two parameters) supports a penalized comparison.
    """
    data = sorted((float(a), float(s)) for a, s in speeds)
    if len(data) < min_points:
        raise InsufficientSpan(f"need at least {min_points} amplitudes, got {len(data)}")
    A = np.array([a for a, _ in data])
    s = np.array([v for _, v in data])
    if A.min() <= 1.0 and law == A_OVER_LOG_A:
        raise ValueError("A/log A needs amplitudes above 1")
    if A.min() <= 0 or A.max() / A.min() < min_span:
        raise InsufficientSpan(f"amplitudes span a factor {A.max() / A.min():.3g} < {min_span:g}")
    if law == A_OVER_LOG_A:
        x = A / np.log(A)
        C = float(x @ s / (x @ x))
        yhat, q, k = C * x, None, 1
    elif law == POWER:
        if np.any(s <= 0):
            raise ValueError("power-law fit needs positive speeds")
        q, logC = np.polyfit(np.log(A), np.log(s), 1)
        C, q = float(np.exp(logC)), float(q)
        yhat, k = C * A**q, 2
    else:
        raise ValueError(f"unknown law {law!r}")
    ss_res = max(float(np.sum((s - yhat) ** 2)), 1e-300)
    n = len(s)
    bic = n * math.log(ss_res / n) + k * math.log(n)
    return GrowthFit(law, C, q, _r2(s, yhat), bic, n)
