"""Quadrature and root-finding solutions of the 1D and shear cell problems.

These are exact up to quadrature and bisection tolerances and serve as the
reference values for the time-marching solver.

Shear flows ``V = (v(y), 0)`` with direction ``p = (m, n)`` reduce the cell
problem to an ODE in ``y`` for the corrector slope ``P = n + u'``:

    sqrt(m^2 + P^2) + m A v(y) = lam                          (no strain)
    sqrt(m^2 + P^2) + c P s(y) / sqrt(m^2 + P^2) + k(y) = h   (general)

with the closure ``mean(P) = n``.  The strained shear speed is the second
form with ``c = 1``, ``s = m A v'`` and ``k = m A v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .flows import FourierProfile

Profile1D = FourierProfile

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


class DegenerateInput(ValueError):
    pass


class RootBracketFailure(RuntimeError):
    pass


def _gauss_legendre(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _panel_nodes(panels: int, order: int):
    x, w = _gauss_legendre(order)
    left = np.arange(panels)[:, None] / panels
    nodes = (left + (x[None, :] + 1.0) / (2.0 * panels)).ravel()
    weights = np.tile(w / (2.0 * panels), panels)
    return nodes, weights


def periodic_integral(
    f: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-12,
    order: int = 8,
    panels: int = 4,
    max_panels: int = 1 << 14,
) -> float:
    """Integral of ``f`` over [0, 1] by composite Gauss-Legendre.

    The number of panels doubles until two successive estimates differ by
    less than ``tol`` (absolute, scaled by ``max(1, |I|)``).
    """
    nodes, w = _panel_nodes(panels, order)
    prev = float(w @ f(nodes))
    while panels < max_panels:
        panels *= 2
        nodes, w = _panel_nodes(panels, order)
        cur = float(w @ f(nodes))
        if abs(cur - prev) < tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    return prev


def _check_mean_zero(v: Profile1D) -> None:
    if abs(v.mean) > 1e-14:
        raise ValueError(f"profile must have mean zero, got mean {v.mean:g}")


def speed_1d(v: Profile1D, tol: float = 1e-12) -> float:
    """Harmonic mean of ``1 + v``, or 0 when ``1 + v`` vanishes somewhere."""
    _check_mean_zero(v)
    if v.is_constant:
        return 1.0
    if 1.0 + v.min() <= 0.0:
        return 0.0
    return 1.0 / periodic_integral(lambda x: 1.0 / (1.0 + v(x)), tol)


def speed_1d_strain(v: Profile1D, tol: float = 1e-12) -> float:
    """Harmonic mean of ``1 + v + v'``, or 0 when it vanishes somewhere."""
    _check_mean_zero(v)
    if v.is_constant:
        return 1.0
    w = v + v.derivative()
    if 1.0 + w.min() <= 0.0:
        return 0.0
    return 1.0 / periodic_integral(lambda x: 1.0 / (1.0 + w(x)), tol)


@dataclass(frozen=True)
class ShearSpeeds:
    """Shear-flow speeds for ``p = (m, n)``.

    ``lambda_boundary`` marks the case where the speed equals the lower bound
    ``|m| + max(m A v)``; there the corrector may switch branches where
    ``P`` touches zero and ``closure_nonunique`` flags that the mean-zero
    closure admits more than one corrector.
    """

    m: float
    n: float
    A: float
    lam: float
    lambda_hat: float
    lower_bound: float
    lambda_boundary: bool
    lambda_hat_boundary: bool
    closure_nonunique: bool


def _bisect(g: Callable[[float], float], lo: float, hi: float, atol: float = 1e-10) -> float:
    """Root of an increasing ``g`` on ``[lo, hi]`` (``g(lo) < 0 <= g(hi)``)."""
    glo, ghi = g(lo), g(hi)
    if glo >= 0:
        return lo
    if ghi < 0:
        raise RootBracketFailure(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _outer_bracket(m: float, n: float, vmax_abs: float, A: float, lam0: float) -> tuple[float, float]:
    return lam0 + 1e-12, lam0 + 2.0 + A * abs(m) * vmax_abs + abs(n) + abs(m)


def _mv_max(m: float, v: Profile1D, A: float) -> float:
    vmin, _, vmax, _ = v.extrema()
    return A * (m * vmax if m >= 0 else m * vmin)


def _closure_lambda(m: float, n: float, v: Profile1D, A: float, tol: float) -> tuple[float, bool, bool]:
    lam0 = abs(m) + _mv_max(m, v, A)

    def mean_slope(lam: float) -> float:
        return periodic_integral(
            lambda x: np.sqrt(np.maximum((lam - m * A * v(x)) ** 2 - m * m, 0.0)), tol
        )

    at_bound = mean_slope(lam0)
    if at_bound >= abs(n):
        return lam0, True, at_bound > abs(n) + 1e-12 and m != 0
    lo, hi = _outer_bracket(m, n, float(np.max(np.abs(v.extrema()[::2]))), A, lam0)
    return _bisect(lambda lam: mean_slope(lam) - abs(n), lo, hi), False, False


def shear_speed(m: float, n: float, v: Profile1D, A: float = 1.0, tol: float = 1e-12) -> float:
    """Speed ``lam(m, n)`` of the unstrained shear cell problem."""
    if m == 0 and n == 0:
        raise DegenerateInput("direction (m, n) must be nonzero")
    _check_mean_zero(v)
    return _closure_lambda(float(m), float(n), v, float(A), tol)[0]


def _inner_slopes(target: np.ndarray, m: float, cs: np.ndarray, iters: int = 200) -> np.ndarray:
    """Vectorized safeguarded bisection for ``P > 0`` in
    ``sqrt(m^2 + P^2) + cs P / sqrt(m^2 + P^2) = target``.

    The residual is below ``target`` on the dip near ``P = 0`` and increasing
    past it, so ``[0, target + |cs| + 1]`` brackets the unique crossing.
    """
    if np.any(target < abs(m) - 1e-12):
        raise RootBracketFailure("inner target below |m|; outer value lies under the admissible range")
    lo = np.zeros_like(target)
    hi = target + np.abs(cs) + 1.0
    m2 = m * m
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        r = np.sqrt(m2 + mid * mid)
        f = r + cs * mid / r - target
        below = f < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
            break
    return 0.5 * (lo + hi)


def h_of_c(m: float, n: float, s: Profile1D, k: Profile1D, c: float, tol: float = 1e-12) -> float:
    """Cell value ``h(c)`` of the strain-parameter family.

    ``s`` and ``k`` are used as given (no amplitude scaling).  ``s`` must
    vanish where ``k`` is maximal.
    """
    if m == 0 or n == 0:
        raise DegenerateInput("h(c) needs m n != 0")
    if c < 0:
        raise ValueError("c must be non-negative")
    _check_mean_zero(s)
    _, _, kmax, kargmax = k.extrema()
    if abs(float(s(kargmax))) > 1e-7 * max(1.0, float(np.max(np.abs(s.extrema()[::2])))):
        raise ValueError("s must vanish where k attains its maximum")
    return _strained_closure(float(m), float(n), s, k, float(c), tol)[0]


def _strained_closure(m, n, s, k, c, tol):
    sign = 1.0 if n > 0 else -1.0
    h0 = abs(m) + k.extrema()[2]

    def mean_slope(h: float) -> float:
        def integrand(x):
            return _inner_slopes(np.maximum(h - k(x), abs(m)), m, sign * c * s(x))

        return periodic_integral(integrand, tol)

    at_bound = mean_slope(h0)
    if at_bound >= abs(n):
        return h0, True
    smax = float(np.max(np.abs(s.extrema()[::2])))
    kabs = float(np.max(np.abs(k.extrema()[::2])))
    lo, hi = h0 + 1e-12, h0 + 2.0 + kabs + c * smax + abs(n) + abs(m)
    return _bisect(lambda h: mean_slope(h) - abs(n), lo, hi), False


def shear_speed_strain(m: float, n: float, v: Profile1D, A: float = 1.0, tol: float = 1e-12) -> float:
    """Speed ``lam_hat(m, n)`` of the strained shear cell problem."""
    if m == 0 and n == 0:
        raise DegenerateInput("direction (m, n) must be nonzero")
    _check_mean_zero(v)
    m, n, A = float(m), float(n), float(A)
    if m == 0:
        return abs(n)
    if n == 0 or A == 0 or v.is_constant:
        # strain term drops out or P vanishes at the top of m v
        return _closure_lambda(m, n, v, A, tol)[0]
    k = v.scaled(m * A)
    s = v.derivative().scaled(m * A)
    return _strained_closure(m, n, s, k, 1.0, tol)[0]


def shear_speeds(m: float, n: float, v: Profile1D, A: float = 1.0, tol: float = 1e-12) -> ShearSpeeds:
    """Both shear speeds with boundary-case diagnostics."""
    if m == 0 and n == 0:
        raise DegenerateInput("direction (m, n) must be nonzero")
    _check_mean_zero(v)
    m, n, A = float(m), float(n), float(A)
    lam, lam_bd, nonunique = _closure_lambda(m, n, v, A, tol)
    if m == 0:
        lam_hat, hat_bd = abs(n), False
    elif n == 0 or A == 0 or v.is_constant:
        lam_hat, hat_bd = lam, lam_bd
    else:
        lam_hat, hat_bd = _strained_closure(m, n, v.derivative().scaled(m * A), v.scaled(m * A), 1.0, tol)
    lower = abs(m) + _mv_max(m, v, A)
    return ShearSpeeds(m, n, A, lam, lam_hat, lower, lam_bd, hat_bd, nonunique)
