"""Compiled inner loops for the Hamilton-Jacobi time marching.

Arrays are 2D ``(nx, ny)``; a 1D problem uses ``ny = 1`` with infinite
y-spacing so every y difference vanishes.  ``sig`` scales the gradient norm
(``|q|`` becomes ``sig |q|``) so that the same loops serve a conformally
rotated lattice frame.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _stable_dt(u, vx, vy, px, py, hxp, hxm, hyp, hym, quad, sig, d, cfl, dcfl):
    s2 = sig * sig
    nx, ny = u.shape
    rate = 0.0
    drate = 0.0
    for i in range(nx):
        ip = (i + 1) % nx
        im = (i - 1) % nx
        cx = 0.5 * (1.0 / hxp[i] + 1.0 / hxm[i])
        for j in range(ny):
            jp = (j + 1) % ny
            jm = (j - 1) % ny
            cy = 0.5 * (1.0 / hyp[j] + 1.0 / hym[j])
            if quad:
                c = u[i, j]
                qx = max(abs(px + (u[ip, j] - c) / hxp[i]), abs(px + (c - u[im, j]) / hxm[i]))
                qy = max(abs(py + (u[i, jp] - c) / hyp[j]), abs(py + (c - u[i, jm]) / hym[j]))
                ax = 2.0 * s2 * qx + abs(vx[i, j])
                ay = 2.0 * s2 * qy + abs(vy[i, j])
            else:
                ax = sig + abs(vx[i, j])
                ay = sig + abs(vy[i, j])
            r = ax * cx + ay * cy
            if r > rate:
                rate = r
            if d > 0.0:
                s = 2.0 * d * s2 * (1.0 / (hxp[i] * hxm[i]) + 1.0 / (hyp[j] * hym[j]))
                if s > drate:
                    drate = s
    dt = cfl / rate if rate > 0.0 else np.inf
    if d > 0.0:
        dt = min(dt, dcfl / drate)
    return dt


@njit(cache=True)
def advance(u, vx, vy, px, py, hxp, hxm, hyp, hym, quad, sig, d, cfl, dcfl, t, t_end, max_steps):
    """March ``u`` in place from ``t`` to ``t_end``.

    Local Lax-Friedrichs: per node and axis the dissipation is a bound on
    ``|dHam/dq_i|`` over the one-sided difference quotients of the stencil.
    The step is recomputed every iteration because for the quadratic
    Hamiltonian that bound moves with the solution.  Returns
    ``(t, steps, smallest dt, largest dt)``.
    """
    nx, ny = u.shape
    s2 = sig * sig
    un = np.empty_like(u)
    steps = 0
    dt_min = np.inf
    dt_max = 0.0
    while t < t_end and steps < max_steps:
        dt = _stable_dt(u, vx, vy, px, py, hxp, hxm, hyp, hym, quad, sig, d, cfl, dcfl)
        if t + dt >= t_end:
            dt = t_end - t
        else:
            dt_min = min(dt_min, dt)
        dt_max = max(dt_max, dt)
        for i in range(nx):
            ip = (i + 1) % nx
            im = (i - 1) % nx
            for j in range(ny):
                jp = (j + 1) % ny
                jm = (j - 1) % ny
                c = u[i, j]
                dxp = (u[ip, j] - c) / hxp[i]
                dxm = (c - u[im, j]) / hxm[i]
                dyp = (u[i, jp] - c) / hyp[j]
                dym = (c - u[i, jm]) / hym[j]
                qx = px + 0.5 * (dxp + dxm)
                qy = py + 0.5 * (dyp + dym)
                if quad:
                    g = s2 * (qx * qx + qy * qy)
                    ax = 2.0 * s2 * max(abs(px + dxp), abs(px + dxm)) + abs(vx[i, j])
                    ay = 2.0 * s2 * max(abs(py + dyp), abs(py + dym)) + abs(vy[i, j])
                else:
                    g = sig * np.sqrt(qx * qx + qy * qy)
                    ax = sig + abs(vx[i, j])
                    ay = sig + abs(vy[i, j])
                ham = g + vx[i, j] * qx + vy[i, j] * qy - 0.5 * ax * (dxp - dxm) - 0.5 * ay * (dyp - dym)
                if d > 0.0:
                    lap = 2.0 * (dxp - dxm) / (hxp[i] + hxm[i])
                    if ny > 1:
                        lap += 2.0 * (dyp - dym) / (hyp[j] + hym[j])
                    ham -= d * s2 * lap
                un[i, j] = c - dt * ham
        u[:, :] = un
        t += dt
        steps += 1
    return t, steps, dt_min, dt_max


@njit(cache=True)
def weighted_mean(u, wx, wy):
    nx, ny = u.shape
    acc = 0.0
    for i in range(nx):
        for j in range(ny):
            acc += wx[i] * wy[j] * u[i, j]
    return acc
