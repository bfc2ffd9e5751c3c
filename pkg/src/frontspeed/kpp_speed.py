"""Principal eigenvalue of the periodic advection-diffusion operator and KPP speeds.

For ``p`` in R^n the operator

    L phi = d Lap(phi) + (-2 d p - A V).D(phi) + (d |p|^2 + A p.V) phi

has a real, simple principal eigenvalue ``kappa_A(p)`` with a positive
eigenfunction; ``S = -log(phi)`` then solves the viscous F cell problem.
The KPP front speed in direction ``e`` is
``inf_{lam > 0} (f'(0) + kappa_A(lam e)) / lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigs, splu

from .flows import FlowSpec, max_abs_components, velocity_on_grid
from .hj_front import BoundaryMinimum, Grid, _as_vector, golden_log_search


class PecletGuard(ValueError):
    pass


class SlowConvergence(RuntimeError):
    def __init__(self, message: str, result: "EigenResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class EigenProblem:
    p: tuple[float, ...]
    A: float
    flow: FlowSpec
    grid: Grid
    d: float = 1.0
    reaction_slope: float = 1.0

    def __post_init__(self):
        p = _as_vector(self.p)
        if len(p) != self.flow.dimension:
            raise ValueError(f"direction has {len(p)} components, flow is {self.flow.dimension}D")
        if self.grid.dim != self.flow.dimension:
            raise ValueError("grid and flow dimensions differ")
        if self.A < 0 or self.d <= 0 or self.reaction_slope <= 0:
            raise ValueError("need A >= 0, d > 0 and f'(0) > 0")
        object.__setattr__(self, "p", p)

    def cell_peclet(self) -> float:
        vmax = float(np.max(max_abs_components(self.flow)))
        return self.grid.h * (2.0 * self.d * float(np.linalg.norm(self.p)) + self.A * vmax) / self.d


@dataclass
class EigenResult:
    eigenvalue: float
    residual: float
    iterations: int
    lower: float = 0.0
    upper: float = 0.0
    min_ratio: float = 1.0
    vector: np.ndarray | None = field(default=None, repr=False)

    def record(self, ep: EigenProblem) -> dict:
        return {
            "p": list(ep.p),
            "A": ep.A,
            "eigenvalue": self.eigenvalue,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _fitted_coefficients(b: np.ndarray, d: float, hp: np.ndarray, hm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially fitted neighbour weights for ``d u'' + b u'``.

    Three-point differences on spacings ``hp`` (forward) and ``hm``
    (backward), with the diffusion raised to ``d (Pe/2) coth(Pe/2)`` where
    ``Pe = |b| max(hp, hm) / d``.  That choice keeps both weights
    non-negative at any cell Peclet number, so the matrix stays Metzler.
    """
    half = 0.5 * b * np.maximum(hp, hm) / d
    with np.errstate(invalid="ignore", divide="ignore"):
        fit = np.where(np.abs(half) < 1e-8, 1.0, half / np.tanh(half))
    s = hp + hm
    return (2.0 * d * fit + b * hm) / (hp * s), (2.0 * d * fit - b * hp) / (hm * s)


def _central_coefficients(b: np.ndarray, d: float, hp: np.ndarray, hm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second-order three-point weights for ``d u'' + b u'``."""
    s = hp + hm
    return (2.0 * d + b * hm) / (hp * s), (2.0 * d - b * hp) / (hm * s)


SCHEMES = {"central": _central_coefficients, "fitted": _fitted_coefficients}


def assemble_operator(ep: EigenProblem, scheme: str = "central") -> sp.csc_matrix:
    """Sparse matrix of ``L`` on the periodic tensor grid (row-major nodes)."""
    weights = SCHEMES[scheme]
    g = ep.grid
    n, d = g.n, ep.d
    x = g.nodes()
    hp1, hm1 = g.spacing()
    p = np.asarray(ep.p)
    if g.dim == 1:
        (v,) = velocity_on_grid(ep.flow, [x], ep.A)
        comps = [v]
        shape = (n,)
        spacings = [(hp1, hm1)]
    else:
        comps = velocity_on_grid(ep.flow, [x, x], ep.A)
        shape = (n, n)
        spacings = [(hp1[:, None], hm1[:, None]), (hp1[None, :], hm1[None, :])]
    N = int(np.prod(shape))
    idx = np.arange(N).reshape(shape)
    potential = d * float(p @ p) + sum(pi * c for pi, c in zip(p, comps))
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [np.zeros(N)]
    diag = np.asarray(potential, dtype=float).ravel() * np.ones(N)
    for axis, (pi, Vi, (hp, hm)) in enumerate(zip(p, comps, spacings)):
        b = -2.0 * d * pi - Vi
        up, down = weights(b, d, np.broadcast_to(hp, shape), np.broadcast_to(hm, shape))
        up, down = up.ravel(), down.ravel()
        for shift, wgt in ((-1, up), (1, down)):
            rows.append(idx.ravel())
            cols.append(np.roll(idx, shift, axis=axis).ravel())
            vals.append(wgt)
        diag -= up + down
    vals[0] = diag
    L = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return L.tocsc()


def _factor(M):
    return splu(M.tocsc(), permc_spec="MMD_AT_PLUS_A")


def _collatz_bounds(L, phi) -> tuple[float, float]:
    ratio = (L @ phi) / phi
    return float(ratio.min()), float(ratio.max())


def real_part_bound(L) -> float:
    """Upper bound on the real parts of the spectrum of ``L``.

    Every eigenvalue lies in the numerical range, whose real extent is the
    top eigenvalue of the symmetric part; Gershgorin bounds that.
    """
    S = ((L + L.T) * 0.5).tocsr()
    diag = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.max(diag + off))


def _perron_iteration(L, phi, tol, max_iter):
    """Shift-invert power iteration for a Metzler matrix with Collatz-Wielandt brackets."""
    N = L.shape[0]
    eye = sp.identity(N, format="csc")
    lo, hi = _collatz_bounds(L, phi)
    sigma = hi + max(hi - lo, 1e-3 * max(1.0, abs(hi)))
    lu = _factor(sigma * eye - L)
    it, best, stalled, accepted = 0, np.inf, 0, False
    for it in range(1, max_iter + 1):
        psi = lu.solve(phi)
        if np.any(psi <= 0):
            # the iterate must stay positive; rounding at a huge condition number breaks this
            psi = np.abs(psi) + 1e-300
        phi = psi / np.linalg.norm(psi)
        lo, hi = _collatz_bounds(L, phi)
        scale = max(1.0, abs(hi))
        if hi - lo <= tol * scale:
            accepted = True
            break
        # the bracket can bottom out at rounding level; then the residual decides
        stalled = stalled + 1 if hi - lo > 0.9 * best else 0
        best = min(best, hi - lo)
        if stalled >= 5 and np.linalg.norm(L @ phi - 0.5 * (lo + hi) * phi) <= tol * scale:
            accepted = True
            break
        # refactor only when the shift can move much closer to the bracket
        if sigma - hi > 50.0 * (hi - lo) and sigma - hi > 10.0 * tol * scale:
            sigma = hi + max(2.0 * (hi - lo), tol * scale)
            lu = _factor(sigma * eye - L)
    return 0.5 * (lo + hi), phi, it, lo, hi, accepted


def _shift_invert_arnoldi(L, phi, tol, max_iter):
    """Eigenvalue of ``L`` nearest a shift placed above every real part.

    With ``sigma`` at or above the numerical-range bound, the eigenvalue
    with the largest real part is also the one closest to ``sigma``.
    """
    sigma = real_part_bound(L) + 1.0
    try:
        w, v = eigs(L, k=1, sigma=sigma, v0=phi, tol=tol, maxiter=max_iter * 50)
    except ArpackNoConvergence:
        return math.nan, phi, max_iter, -math.inf, math.inf, False
    lam = complex(w[0])
    vec = v[:, 0]
    vec = vec / vec[np.argmax(np.abs(vec))]
    phi = vec.real / np.linalg.norm(vec.real)
    kappa = lam.real
    res = float(np.linalg.norm(L @ phi - kappa * phi))
    scale = max(1.0, abs(kappa))
    ok = abs(lam.imag) <= 1e-8 * scale and res <= max(tol, 1e-9) * scale * 10
    return kappa, phi, 1, kappa - res, kappa + res, ok


def principal_eigenvalue(
    ep: EigenProblem,
    tol: float = 1e-9,
    max_iter: int = 200,
    include_reaction: bool = False,
    peclet_limit: float = 25.0,
    start: np.ndarray | None = None,
    keep_vector: bool = False,
    scheme: str = "central",
) -> EigenResult:
    """Principal eigenvalue ``kappa_A(p)`` of the discretized operator.

    ``scheme="central"`` (default) uses second-order differences and
    shift-invert Arnoldi with the shift above the numerical range, so the
    eigenvalue found is the one with the largest real part.  The
    eigenvector's sign pattern is returned in ``min_ratio`` (its smallest
    entry over its largest) as a positivity check.

    ``scheme="fitted"`` uses exponentially fitted differences, which make
    the matrix Metzler; shift-invert power iteration is then a Perron
    iteration and Collatz-Wielandt quotients bracket the eigenvalue.  It is
    monotone at any Peclet number but adds numerical diffusion.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {tuple(SCHEMES)}")
    pe = ep.cell_peclet()
    if pe > peclet_limit:
        raise PecletGuard(f"cell Peclet number {pe:.3g} exceeds {peclet_limit:g}; refine the grid")
    L = assemble_operator(ep, scheme)
    N = L.shape[0]
    if start is None:
        phi = np.ones(N)
    else:
        phi = np.abs(np.asarray(start, dtype=float).ravel())
        phi += 1e-8 * phi.max()
    phi /= np.linalg.norm(phi)
    solver = _perron_iteration if scheme == "fitted" else _shift_invert_arnoldi
    kappa, phi, it, lo, hi, accepted = solver(L, phi, tol, max_iter)
    residual = float(np.linalg.norm(L @ phi - kappa * phi)) if math.isfinite(kappa) else math.inf
    shift = ep.reaction_slope if include_reaction else 0.0
    result = EigenResult(
        kappa + shift, residual, it, lo + shift, hi + shift,
        float(phi.min() / phi.max()) if math.isfinite(kappa) else math.nan,
        phi.reshape(-1) if keep_vector else None,
    )
    if not accepted:
        raise SlowConvergence(f"eigenvalue not resolved: bracket [{lo:.6g}, {hi:.6g}] after {it} iterations", result)
    return result


@dataclass(frozen=True)
class KPPSpeed:
    speed: float
    lam: float
    kappa: float
    kappa_bracket: float
    evaluations: int
    scan: tuple[tuple[float, float], ...]
    multimodal: bool


def kpp_front_speed(
    e,
    A: float,
    fprime: float,
    flow: FlowSpec,
    grid: Grid,
    lam_range: tuple[float, float] = (0.05, 20.0),
    n_scan: int = 24,
    rtol: float = 1e-3,
    tol: float = 1e-9,
    d: float = 1.0,
    peclet_limit: float = 25.0,
    scheme: str = "central",
    full_output: bool = False,
):
    """KPP speed ``c*(A) = inf_lam (f'(0) + kappa_A(lam e)) / lam``.

    ``lam_range`` is in units of ``sqrt(f'(0))``.  The scan is log-spaced and
    its local minima are counted; more than one is reported as
    ``multimodal`` rather than assumed away.
    """
    e = np.asarray(_as_vector(e))
    if fprime <= 0:
        raise ValueError("f'(0) must be positive")
    lo, hi = (float(r) * math.sqrt(fprime) for r in lam_range)
    cache: dict[float, EigenResult] = {}
    vectors: dict[float, np.ndarray] = {}

    def quotient(lam: float) -> float:
        if lam not in cache:
            ep = EigenProblem(tuple(lam * e), A, flow, grid, d, fprime)
            # warm start from the eigenvector of the nearest probe already solved
            near = min(vectors, key=lambda l: abs(math.log(l / lam)), default=None)
            start = None if near is None or abs(math.log(near / lam)) > 0.7 else vectors[near]
            try:
                res = principal_eigenvalue(ep, tol, peclet_limit=peclet_limit, start=start, keep_vector=True, scheme=scheme)
            except SlowConvergence:
                if start is None:
                    raise
                res = principal_eigenvalue(ep, tol, peclet_limit=peclet_limit, keep_vector=True, scheme=scheme)
            vectors[lam] = res.vector
            res.vector = None
            cache[lam] = res
        return (fprime + cache[lam].eigenvalue) / lam

    lams = np.geomspace(lo, hi, n_scan)
    vals = np.array([quotient(float(l)) for l in lams])
    interior = (vals[1:-1] < vals[:-2]) & (vals[1:-1] <= vals[2:])
    multimodal = int(np.sum(interior)) > 1
    k = int(np.argmin(vals))
    if k == 0 or k == n_scan - 1:
        raise BoundaryMinimum(f"KPP minimum at lambda = {lams[k]:.4g}, an end of the scan", float(lams[k]), float(vals[k]))
    golden_log_search(quotient, float(lams[k - 1]), float(lams[k + 1]), rtol)
    best = min(cache, key=quotient)
    speed = quotient(best)
    if not full_output:
        return speed
    r = cache[best]
    return KPPSpeed(
        speed, best, r.eigenvalue, r.upper - r.lower, len(cache),
        tuple((float(l), float(v)) for l, v in zip(lams, vals)), multimodal,
    )


@dataclass(frozen=True)
class VFRecord:
    """One matched sweep cell: KPP speed and ``kappa`` at the same ``(e, A)`` and grid."""

    e: tuple[float, ...]
    A: float
    fprime: float
    c_star: float
    kappa: float
    tolerance: float = 1e-6


def check_vf_bounds(
    records: Sequence[VFRecord],
    cp: float | None = None,
    slack: float = 0.1,
) -> dict:
    """Audit ``c* <= kappa + f'(0)`` per cell and ``kappa/A`` against ``c_p``.

    ``cp`` (when known) is compared with ``kappa/A`` at the largest amplitude
    per direction, allowing ``slack`` relative to ``max(c_p, 0.05)``; the
    direction of the ``kappa/A`` trend is reported without a verdict.
    """
    report = {"vf1": [], "upper": [], "trend": []}
    for r in records:
        margin = r.kappa + r.fprime - r.c_star
        report["vf1"].append({
            "e": list(r.e), "A": r.A, "c_star": r.c_star, "bound": r.kappa + r.fprime,
            "slack": margin, "pass": bool(margin >= -r.tolerance),
        })
    by_dir: dict[tuple, list[VFRecord]] = {}
    for r in records:
        by_dir.setdefault(tuple(r.e), []).append(r)
    for e, rows in sorted(by_dir.items()):
        rows = sorted(rows, key=lambda r: r.A)
        ratios = [r.kappa / r.A for r in rows if r.A > 0]
        if not ratios:
            continue
        if cp is not None:
            limit = cp + slack * max(cp, 0.05)
            report["upper"].append({
                "e": list(e), "A": rows[-1].A, "kappa_over_A": ratios[-1], "cp": cp,
                "pass": bool(ratios[-1] <= limit),
            })
        diffs = np.diff(ratios)
        trend = "flat" if len(diffs) == 0 else ("decreasing" if np.all(diffs <= 0) else "increasing" if np.all(diffs >= 0) else "mixed")
        report["trend"].append({"e": list(e), "amplitudes": [r.A for r in rows if r.A > 0], "kappa_over_A": ratios, "trend": trend})
    report["pass"] = all(x["pass"] for x in report["vf1"] + report["upper"])
    return report
