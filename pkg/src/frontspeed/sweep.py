"""Parameter sweeps over models, directions and amplitudes.

A sweep evaluates every ``(model, p, A)`` cell of a :class:`SweepConfig`,
fits growth laws per ``(model, p)``, audits the comparison inequalities
between models and writes flat-file summaries.  Failed cells are recorded
with their reason and never abort the sweep.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import closed_form as cf
from .flows import COMPRESSIBLE_1D, SHEAR, FlowSpec, flow_from_mapping, validate
from .hj_front import (
    A_OVER_LOG_A,
    AXIS,
    F,
    FRAMES,
    G,
    POWER,
    VISCOUS_G,
    Grid,
    HJProblem,
    InsufficientSpan,
    IllConditionedFit,
    extrapolate_cp,
    fit_growth_law,
    gamma_from_beta,
    solve_front_speed,
)
from .kpp_speed import EigenProblem, VFRecord, check_vf_bounds, kpp_front_speed, principal_eigenvalue

GAMMA = "gamma"
VISCOUS_F = "ViscousF"
KPP = "KPP"
SWEEP_MODELS = (G, F, GAMMA, VISCOUS_G, VISCOUS_F, KPP)
CSV_COLUMNS = ("model", "p1", "p2", "A", "speed", "residual", "grid", "T_final")

# inequality statements embedded in the audit report, keyed by check name
CHECKS = {
    "super": "beta_A(p) >= alpha_A(p) - 1/4 (t^2 > t - 1/4 in the inf-max formulas)",
    "sandwich_lower": "tau alpha_{A/tau}(p) <= gamma_A(p), tau = 2 sqrt(f'(0))",
    "sandwich_upper": "gamma_A(p) <= beta_A(p) + f'(0)",
    "gamma_vs_alpha": "shear flow: gamma_A(p) >= alpha_A(p) when f'(0) >= 1/4, may fail when f'(0) < 1/4",
    "strain_1d": "1D compressible flow: c >= c_hat, equality only for v' = 0",
    "strain_shear": "shear flow: lambda(m, n) >= lambda_hat(m, n)",
    "vf1": "c_p*(A) <= kappa_A(p) + f'(0)",
    "viscous_g_bounded": "viscous G: chi_A bounded in A (largest-A value within 3x the smallest-A value)",
}


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to reproduce a sweep.

    ``grid``, ``cluster`` and ``frame`` describe the grid of the inviscid
    models (G, F and gamma).  ``viscous_grid`` (ViscousG) and ``eigen_grid``
    (ViscousF and KPP) are uniform and default to ``grid`` cells per axis.
    """

    flow: FlowSpec
    models: tuple[str, ...]
    directions: tuple[tuple[float, ...], ...]
    amplitudes: tuple[float, ...]
    grid: int = 128
    cluster: float = 0.0
    frame: str = AXIS
    viscous_grid: int | None = None
    eigen_grid: int | None = None
    fprime: float = 1.0
    tol: float = 2e-3
    eig_tol: float = 1e-9
    gamma_range: tuple[float, float] = (0.002, 20.0)
    gamma_rtol: float = 1e-3
    kpp_range: tuple[float, float] = (0.05, 20.0)
    fit_min_points: int = 5
    fit_min_span: float = 10.0
    out: str = "results"
    workers: int = 1
    source: str = ""

    def __post_init__(self):
        bad = [m for m in self.models if m not in SWEEP_MODELS]
        if bad:
            raise ValueError(f"unknown models {bad}; choose from {SWEEP_MODELS}")
        if not self.directions:
            raise ValueError("at least one direction is required")
        for p in self.directions:
            if len(p) != self.flow.dimension:
                raise ValueError(f"direction {p} does not match the {self.flow.dimension}D flow")
        amps = list(self.amplitudes)
        if any(a < 0 for a in amps) or any(b <= a for a, b in zip(amps, amps[1:])):
            raise ValueError("amplitudes must be non-negative and strictly increasing")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")
        if self.fprime <= 0 or self.tol <= 0 or self.workers < 1:
            raise ValueError("need f'(0) > 0, tol > 0 and at least one worker")

    @property
    def tau(self) -> float:
        return 2.0 * math.sqrt(self.fprime)

    def hj_grid(self) -> Grid:
        return Grid(self.grid, self.flow.dimension, self.cluster, self.frame)

    def viscous_hj_grid(self) -> Grid:
        return Grid(self.viscous_grid or self.grid, self.flow.dimension)

    def eigen_solver_grid(self) -> Grid:
        return Grid(self.eigen_grid or self.grid, self.flow.dimension)

    def as_dict(self) -> dict:
        return {
            "flow": self.flow.to_mapping(),
            "models": list(self.models),
            "directions": [list(p) for p in self.directions],
            "amplitudes": list(self.amplitudes),
            "grid": self.grid,
            "cluster": self.cluster,
            "frame": self.frame,
            "viscous_grid": self.viscous_grid,
            "eigen_grid": self.eigen_grid,
            "fprime": self.fprime,
            "tol": self.tol,
            "eig_tol": self.eig_tol,
            "gamma_range": list(self.gamma_range),
            "gamma_rtol": self.gamma_rtol,
            "kpp_range": list(self.kpp_range),
            "fit_min_points": self.fit_min_points,
            "fit_min_span": self.fit_min_span,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SweepConfig":
        kw = dict(d)
        kw["flow"] = flow_from_mapping(kw["flow"])
        kw["models"] = tuple(kw["models"])
        kw["directions"] = tuple(tuple(float(c) for c in p) for p in kw["directions"])
        kw["amplitudes"] = tuple(float(a) for a in kw["amplitudes"])
        for key in ("gamma_range", "kpp_range"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _opt_int(text: str | None) -> int | None:
    return None if text is None or text.strip().lower() in ("", "none") else int(text)


def load_config(path: str | Path, **overrides) -> SweepConfig:
    """Read a sweep from an INI file with ``[flow]`` and ``[sweep]`` sections.

    ``[sweep]`` keys (defaults in parentheses)::

        models       comma list from G, F, gamma, ViscousG, ViscousF, KPP
        directions   semicolon-separated vectors, e.g. ``1 0; 0.6 0.8``
        amplitudes   increasing list, e.g. ``50 100 200``
        grid         cells per axis for G/F/gamma (128)
        cluster      sinh stretch toward separatrices, 0 = uniform (0)
        frame        axis | diagonal (axis)
        viscous_grid cells per axis for ViscousG (grid)
        eigen_grid   cells per axis for ViscousF and KPP (grid)
        fprime       reaction slope f'(0) (1)
        tol          time-window slope tolerance (2e-3)
        eig_tol      eigen-solver tolerance (1e-9)
        gamma_range  lambda scan interval for gamma (0.002 20)
        gamma_rtol   golden-section relative width (1e-3)
        kpp_range    lambda scan interval for KPP in units of sqrt(f'(0)) (0.05 20)
        fit_min_points, fit_min_span   growth-law fit requirements (5, 10)
        out          output directory (results)
        workers      process pool size (1)

    Keyword ``overrides`` replace values after parsing (``None`` is ignored).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    for sec in ("flow", "sweep"):
        if not parser.has_section(sec):
            raise ValueError(f"{path}: missing [{sec}] section")
    flow = flow_from_mapping(dict(parser["flow"]))
    s = parser["sweep"]
    models = tuple(m.strip() for m in s.get("models", "G").split(",") if m.strip())
    directions = tuple(tuple(_floats(chunk)) for chunk in s.get("directions", "1 0").split(";") if chunk.strip())
    kw = dict(
        flow=flow,
        models=models,
        directions=directions,
        amplitudes=tuple(_floats(s.get("amplitudes", "1"))),
        grid=s.getint("grid", 128),
        cluster=s.getfloat("cluster", 0.0),
        frame=s.get("frame", AXIS).strip(),
        viscous_grid=_opt_int(s.get("viscous_grid")),
        eigen_grid=_opt_int(s.get("eigen_grid")),
        fprime=s.getfloat("fprime", 1.0),
        tol=s.getfloat("tol", 2e-3),
        eig_tol=s.getfloat("eig_tol", 1e-9),
        gamma_range=tuple(_floats(s.get("gamma_range", "0.002 20"))),
        gamma_rtol=s.getfloat("gamma_rtol", 1e-3),
        kpp_range=tuple(_floats(s.get("kpp_range", "0.05 20"))),
        fit_min_points=s.getint("fit_min_points", 5),
        fit_min_span=s.getfloat("fit_min_span", 10.0),
        out=s.get("out", "results").strip(),
        workers=s.getint("workers", 1),
        source=str(path),
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig(**kw)


@dataclass
class Row:
    """One sweep cell.  ``role`` is ``"aux"`` for helper cells added for audits."""

    model: str
    p: tuple[float, ...]
    A: float
    speed: float = math.nan
    residual: float = math.nan
    grid: str = ""
    T_final: float | None = None
    status: str = "ok"
    reason: str = ""
    lam: float | None = None
    role: str = "cell"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "p": list(self.p),
            "A": self.A,
            "speed": _clean(self.speed),
            "residual": _clean(self.residual),
            "grid": self.grid,
            "T_final": _clean(self.T_final),
            "status": self.status,
            "reason": self.reason,
            "lam": _clean(self.lam),
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Row":
        nan = lambda v: math.nan if v is None else float(v)
        return cls(
            d["model"], tuple(float(c) for c in d["p"]), float(d["A"]), nan(d["speed"]), nan(d["residual"]),
            d.get("grid", ""), None if d.get("T_final") is None else float(d["T_final"]),
            d.get("status", "ok"), d.get("reason", ""), None if d.get("lam") is None else float(d["lam"]),
            d.get("role", "cell"),
        )


def _clean(x):
    """JSON-safe number: non-finite values become ``None``."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[Row]
    fits: list[dict] = field(default_factory=list)
    audits: dict | None = None

    def select(self, model: str, p=None, role: str | None = "cell", ok: bool = True) -> list[Row]:
        out = []
        for r in self.rows:
            if r.model != model or (ok and not r.ok) or (role and r.role != role):
                continue
            if p is not None and not np.allclose(r.p, p):
                continue
            out.append(r)
        return out

    def lookup(self, model: str, p, A: float) -> Row | None:
        for r in self.rows:
            if r.model == model and r.ok and np.allclose(r.p, p) and math.isclose(r.A, A, rel_tol=1e-12, abs_tol=1e-12):
                return r
        return None

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "rows": [r.as_dict() for r in self.rows],
            "fits": self.fits,
            "audits": self.audits,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "SweepResult":
        return cls(SweepConfig.from_dict(d["config"]), [Row.from_dict(r) for r in d["rows"]], list(d.get("fits", [])), d.get("audits"))

    @classmethod
    def load(cls, path: str | Path) -> "SweepResult":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            p2 = r.p[1] if len(r.p) > 1 else ""
            w.writerow([
                r.model, repr(r.p[0]), repr(p2) if p2 != "" else "", repr(r.A),
                _fmt(r.speed), _fmt(r.residual), r.grid, _fmt(r.T_final),
            ])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None or not math.isfinite(float(x)):
        return ""
    return repr(float(x))


# ---------------------------------------------------------------- cells


def _tasks(cfg: SweepConfig) -> list[tuple[str, tuple[float, ...], float, str]]:
    tasks = []
    for model in cfg.models:
        for p in cfg.directions:
            for A in cfg.amplitudes:
                tasks.append((model, tuple(p), float(A), "cell"))
    if GAMMA in cfg.models:
        # the lower sandwich bound needs alpha at A / tau
        have = {(t[1], t[2]) for t in tasks if t[0] == G}
        for p in cfg.directions:
            for A in cfg.amplitudes:
                key = (tuple(p), float(A) / cfg.tau)
                if key not in have:
                    have.add(key)
                    tasks.append((G, key[0], key[1], "aux"))
    order = {m: i for i, m in enumerate(SWEEP_MODELS)}
    return sorted(tasks, key=lambda t: (order[t[0]], t[1], t[2], t[3]))


def compute_cell(cfg: SweepConfig, model: str, p: tuple[float, ...], A: float, role: str = "cell") -> Row:
    """Evaluate one cell; any exception becomes a failed row."""
    row = Row(model, p, A, role=role)
    try:
        if model in (G, F, VISCOUS_G):
            grid = cfg.viscous_hj_grid() if model == VISCOUS_G else cfg.hj_grid()
            est = solve_front_speed(HJProblem(model, p, A, cfg.flow), grid, tol=cfg.tol)
            row.speed, row.residual, row.T_final, row.grid = est.speed, est.slope_residual, est.T_final, grid.label()
        elif model == GAMMA:
            grid = cfg.hj_grid()
            estimates = {}

            def beta_at(lam):
                est = solve_front_speed(HJProblem(F, tuple(lam * c for c in p), A, cfg.flow), grid, tol=cfg.tol)
                estimates[lam] = est
                return est

            g = gamma_from_beta(beta_at, cfg.fprime, cfg.gamma_range, rtol=cfg.gamma_rtol, full_output=True)
            row.speed, row.lam, row.grid = g.value, g.lam, grid.label()
            row.residual = g.beta_residual / g.lam
            row.T_final = estimates[g.lam].T_final
        elif model == VISCOUS_F:
            grid = cfg.eigen_solver_grid()
            res = principal_eigenvalue(EigenProblem(p, A, cfg.flow, grid), cfg.eig_tol)
            row.speed, row.residual, row.grid = res.eigenvalue, res.residual, grid.label()
        elif model == KPP:
            grid = cfg.eigen_solver_grid()
            norm = float(np.linalg.norm(p))
            e = tuple(c / norm for c in p)
            k = kpp_front_speed(e, A, cfg.fprime, cfg.flow, grid, cfg.kpp_range, tol=cfg.eig_tol, full_output=True)
            row.speed, row.lam, row.grid = k.speed, k.lam, grid.label()
            row.residual = k.kappa_bracket / k.lam
        else:  # pragma: no cover - guarded by SweepConfig
            raise ValueError(model)
    except Exception as exc:  # noqa: BLE001 - failed cells are data
        row.status = "failed"
        row.reason = f"{type(exc).__name__}: {exc}"
        row.speed = math.nan
    return row


def _cell_job(args):
    cfg, task = args
    return compute_cell(cfg, *task)


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> SweepResult:
    """Compute every cell, fit growth laws and audit the inequalities.

    Rows come back in a fixed order (model, direction, amplitude) whatever
    the pool size.
    """
    validate(cfg.flow, strict=True)
    tasks = _tasks(cfg)
    k = cfg.workers if workers is None else workers
    if k > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=k) as pool:
            rows = list(pool.map(_cell_job, [(cfg, t) for t in tasks]))
    else:
        rows = [compute_cell(cfg, *t) for t in tasks]
    result = SweepResult(cfg, rows)
    result.fits = fit_laws(result)
    result.audits = audit_inequalities(result)
    return result


# ---------------------------------------------------------------- fits


def fit_laws(result: SweepResult) -> list[dict]:
    """Growth-law fits and ``c_p`` extrapolation per ``(model, p)``.

    The preferred law is the one with the smaller BIC.  Fit errors (too few
    amplitudes, ill-conditioned extrapolation) are recorded, not raised.
    """
    cfg = result.config
    fits = []
    for model in cfg.models:
        for p in cfg.directions:
            data = [(r.A, r.speed) for r in result.select(model, p) if r.A > 0 and r.speed > 0]
            entry = {"model": model, "p": list(p), "points": len(data), "laws": {}, "preferred": None, "cp": None}
            for law in (A_OVER_LOG_A, POWER):
                try:
                    entry["laws"][law] = fit_growth_law(data, law, cfg.fit_min_points, cfg.fit_min_span).as_dict()
                except (InsufficientSpan, ValueError) as exc:
                    entry["laws"][law] = {"error": str(exc)}
            ok = {k: v for k, v in entry["laws"].items() if "bic" in v}
            if ok:
                entry["preferred"] = min(ok, key=lambda k: ok[k]["bic"])
            if model in (G, F, VISCOUS_F) and len(data) >= 3:
                try:
                    c = extrapolate_cp(data)
                    entry["cp"] = {"value": c.cp, "slope": c.slope, "residual": c.residual}
                except (IllConditionedFit, ValueError) as exc:
                    entry["cp"] = {"error": str(exc)}
            fits.append(entry)
    return fits


# ---------------------------------------------------------------- audits


def _item(p, A, lhs, rhs, tol, passed, **extra) -> dict:
    d = {"p": list(p), "A": A, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "tolerance": tol, "pass": bool(passed)}
    d.update(extra)
    return d


def audit_inequalities(result: SweepResult) -> dict:
    """Check every inequality the sweep has data for.

    Each audit carries its check name and statement from ``CHECKS``;
    items report both sides, the slack ``rhs - lhs`` and the tolerance
    (the combined residuals of the cells involved).
    """
    cfg = result.config
    flow = cfg.flow
    f0, tau = cfg.fprime, cfg.tau
    audits: dict[str, list[dict]] = {}

    for p in cfg.directions:
        for A in cfg.amplitudes:
            a, b, gm = result.lookup(G, p, A), result.lookup(F, p, A), result.lookup(GAMMA, p, A)
            if a and b:
                eps = a.residual + b.residual
                audits.setdefault("super", []).append(
                    _item(p, A, a.speed - 0.25, b.speed, eps, b.speed >= a.speed - 0.25 - eps))
            if gm:
                a_tau = result.lookup(G, p, A / tau)
                if a_tau:
                    eps = tau * a_tau.residual + gm.residual
                    audits.setdefault("sandwich_lower", []).append(
                        _item(p, A, tau * a_tau.speed, gm.speed, eps, tau * a_tau.speed - eps <= gm.speed))
                if b:
                    eps = gm.residual + b.residual
                    audits.setdefault("sandwich_upper", []).append(
                        _item(p, A, gm.speed, b.speed + f0, eps, gm.speed <= b.speed + f0 + eps))
                if a and flow.kind == SHEAR:
                    eps = a.residual + gm.residual
                    holds = gm.speed >= a.speed - eps
                    note = "expected to hold" if f0 >= 0.25 else "exception allowed for f'(0) < 1/4"
                    audits.setdefault("gamma_vs_alpha", []).append(
                        _item(p, A, a.speed, gm.speed, eps, holds or f0 < 0.25, holds=bool(holds), note=note))

    if flow.kind == COMPRESSIBLE_1D:
        for A in cfg.amplitudes:
            v = flow.profile.scaled(A)
            c, ch = cf.speed_1d(v), cf.speed_1d_strain(v)
            flat = v.is_constant
            passed = c >= ch - 1e-9 and (flat or c == 0 or c > ch)
            audits.setdefault("strain_1d", []).append(_item((1.0,), A, ch, c, 1e-9, passed))

    if flow.kind == SHEAR:
        for p in cfg.directions:
            for A in cfg.amplitudes:
                s = cf.shear_speeds(p[0], p[1], flow.profile, A)
                audits.setdefault("strain_shear", []).append(
                    _item(p, A, s.lambda_hat, s.lam, 1e-9, s.lam >= s.lambda_hat - 1e-9))

    kpp, kap = [], []
    for p in cfg.directions:
        norm = float(np.linalg.norm(p))
        e = tuple(c / norm for c in p)
        for A in cfg.amplitudes:
            c, k = result.lookup(KPP, p, A), result.lookup(VISCOUS_F, e, A)
            if c and k:
                kpp.append(VFRecord(e, A, f0, c.speed, k.speed, c.residual + k.residual + 1e-9))
    if kpp:
        rep = check_vf_bounds(kpp)
        audits["vf1"] = [
            _item(r["e"], r["A"], r["c_star"], r["bound"], rec.tolerance, r["pass"]) for r, rec in zip(rep["vf1"], kpp)
        ]

    for p in cfg.directions:
        chi = sorted((r.A, r.speed) for r in result.select(VISCOUS_G, p) if r.A > 0)
        if len(chi) >= 2:
            (a0, c0), (a1, c1) = chi[0], chi[-1]
            audits.setdefault("viscous_g_bounded", []).append(
                _item(p, a1, c1, 3.0 * c0, 0.0, c1 <= 3.0 * c0, A_ref=a0))

    report = {"checks": [], "pass": True}
    for name in CHECKS:
        if name not in audits:
            continue
        items = audits[name]
        ok = all(i["pass"] for i in items)
        report["checks"].append({"check": name, "statement": CHECKS[name], "items": items, "pass": ok})
        report["pass"] = report["pass"] and ok
    failed = [r for r in result.rows if not r.ok]
    report["failed_cells"] = [{"model": r.model, "p": list(r.p), "A": r.A, "reason": r.reason} for r in failed]
    return report


# ---------------------------------------------------------------- summary


def _classification_dict(classification) -> dict | None:
    if classification is None:
        return None
    return classification if isinstance(classification, dict) else classification.as_dict()


CASE_TEXT = {
    "i": "case (i): no periodic orbit has a nonzero rotation vector; s_T/A -> 0 in every direction",
    "ii": "case (ii): periodic orbits with nonzero rotation vectors share one direction Q; "
    "s_T/A -> 0 only for p perpendicular to Q",
}


def bending_table(directions: Sequence[Sequence[float]], classification: dict | None) -> list[dict]:
    """Per direction: the orbit growth rate ``c_p`` and whether bending occurs."""
    if classification is None:
        return []
    rots = [np.asarray(w["rotation"], dtype=float) for w in classification.get("witnesses", [])]
    table = []
    for p in directions:
        p = np.asarray(p, dtype=float)
        if p.size != 2:
            continue
        e = p / np.linalg.norm(p)
        cp = max([0.0] + [float(e @ q) for q in rots])
        table.append({"p": p.tolist(), "cp": cp, "bending": bool(cp <= 1e-12)})
    return table


def series_name(model: str, p: Sequence[float]) -> str:
    return f"{model}_" + "_".join(f"{c:+.4f}" for c in p).replace("+", "p").replace("-", "m").replace(".", "d")


def emit_summary(result: SweepResult, classification=None, out_dir: str | Path | None = None, figures: bool = True) -> dict:
    """Write ``summary.csv``, ``summary.json``, per-series text and figures.

    Returns the mapping of artifact names to paths.  Payloads contain no
    timing data, so an identical result gives byte-identical CSV and JSON.
    """
    out = Path(out_dir if out_dir is not None else result.config.out)
    cls = _classification_dict(classification)
    paths = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "series").mkdir(exist_ok=True)
        paths["csv"] = out / "summary.csv"
        paths["csv"].write_text(result.to_csv(), encoding="utf-8", newline="\n")
        audits = result.audits if result.audits is not None else audit_inequalities(result)
        fits = result.fits or fit_laws(result)
        summary = {
            "flow": result.config.flow.label(),
            "case": None if cls is None else cls["case"],
            "statement": None if cls is None else CASE_TEXT[cls["case"]],
            "Q": None if cls is None else cls.get("Q"),
            "laws": [
                {"model": f["model"], "p": f["p"], "preferred": f["preferred"],
                 "fit": f["laws"].get(f["preferred"]) if f["preferred"] else None}
                for f in fits
            ],
            "fits": fits,
            "bending": bending_table(result.config.directions, cls),
            "audits": audits,
            "classification": cls,
        }
        paths["json"] = out / "summary.json"
        paths["json"].write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8", newline="\n")
        for model in result.config.models:
            for p in result.config.directions:
                rows = sorted((r.A, r.speed) for r in result.select(model, p, role=None))
                name = series_name(model, p)
                path = out / "series" / f"{name}.txt"
                lines = ["# A speed"] + [f"{a!r} {s!r}" for a, s in rows]
                path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
                paths[f"series:{name}"] = path
        if figures and result.rows:
            from .plotting import plot_speeds

            paths.update(plot_speeds(result, out / "figures"))
    except OSError as exc:
        raise OSError(f"writing summary under {out}: {exc}") from exc
    return paths


def write_result(result: SweepResult, out_dir: str | Path | None = None) -> dict:
    """Write ``result.json`` and ``result.csv`` for a finished sweep."""
    out = Path(out_dir if out_dir is not None else result.config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"json": out / "result.json", "csv": out / "result.csv"}
        paths["json"].write_text(result.to_json(), encoding="utf-8", newline="\n")
        paths["csv"].write_text(result.to_csv(), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"writing sweep result under {out}: {exc}") from exc
    return paths


def with_overrides(cfg: SweepConfig, **kw) -> SweepConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
