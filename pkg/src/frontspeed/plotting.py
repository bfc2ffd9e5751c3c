"""Matplotlib figures for sweep results and orbit scans (files only, Agg backend)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .flows import eval_stream  # noqa: E402

_SAVE = {"dpi": 120, "metadata": {"Software": None}}


def _series(result):
    cfg = result.config
    for model in cfg.models:
        for p in cfg.directions:
            pts = sorted((r.A, r.speed) for r in result.select(model, p) if r.A > 0 and math.isfinite(r.speed))
            if pts:
                yield model, p, np.array(pts)


def _label(model, p) -> str:
    return f"{model} p=(" + ", ".join(f"{c:.3g}" for c in p) + ")"


def plot_speeds(result, fig_dir) -> dict:
    """Log-log speeds with fitted laws, and the normalized ratios ``s/A`` and ``s log A / A``."""
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    fits = {(f["model"], tuple(f["p"])): f for f in result.fits}
    series = list(_series(result))
    paths = {}

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for model, p, pts in series:
        line, = ax.loglog(pts[:, 0], np.maximum(pts[:, 1], 1e-300), "o", label=_label(model, p))
        f = fits.get((model, tuple(float(c) for c in p)))
        law = f and f.get("preferred")
        if law:
            fit = f["laws"][law]
            A = np.geomspace(pts[0, 0], pts[-1, 0], 100)
            y = fit["constant"] * A / np.log(A) if law == "A_over_logA" else fit["constant"] * A ** fit["exponent"]
            ax.loglog(A, y, "-", color=line.get_color(), lw=1, label=f"  fit {law}, r2={fit['r2']:.4f}")
    ax.set_xlabel("amplitude A")
    ax.set_ylabel("front speed")
    ax.set_title(result.config.flow.label())
    if series:
        ax.legend(fontsize=7)
    fig.tight_layout()
    paths["fig:speeds"] = fig_dir / "speeds.png"
    fig.savefig(paths["fig:speeds"], **_SAVE)
    plt.close(fig)

    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    for model, p, pts in series:
        A, s = pts[:, 0], pts[:, 1]
        a1.semilogx(A, s / A, "o-", label=_label(model, p))
        big = A > 1
        if np.any(big):
            a2.semilogx(A[big], s[big] * np.log(A[big]) / A[big], "o-", label=_label(model, p))
    a1.set_xlabel("A")
    a1.set_ylabel("s / A")
    a2.set_xlabel("A")
    a2.set_ylabel("s log(A) / A")
    if series:
        a1.legend(fontsize=7)
    fig.tight_layout()
    paths["fig:normalized"] = fig_dir / "normalized.png"
    fig.savefig(paths["fig:normalized"], **_SAVE)
    plt.close(fig)
    return paths


def plot_orbits(flow, orbits, path, max_orbits: int = 40) -> Path:
    """Stream-function contours with sampled periodic orbits on the unit cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.linspace(0.0, 1.0, 161)
    X, Y = np.meshgrid(x, x, indexing="ij")
    H = eval_stream(flow, np.stack([X, Y], axis=-1))
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.contour(X, Y, H, levels=21, colors="0.75", linewidths=0.6)
    moving = [o for o in orbits if o.moving]
    closed = [o for o in orbits if not o.moving and not o.fixed_point]
    for group, color in ((closed[:max_orbits], "tab:blue"), (moving[:max_orbits], "tab:red")):
        for o in group:
            xy = np.mod(o.samples, 1.0)
            # break the line where it wraps around the torus
            jumps = np.flatnonzero(np.any(np.abs(np.diff(xy, axis=0)) > 0.5, axis=1)) + 1
            for seg in np.split(xy, jumps):
                ax.plot(seg[:, 0], seg[:, 1], color=color, lw=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_title(f"{flow.label()}: red = nonzero rotation vector")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path
