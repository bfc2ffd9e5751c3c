"""Command line entry point: ``frontspeed <verb> ...``.

Verbs::

    validate <config>        check the flow of a config (mean zero, divergence free)
    sweep <config>           run the sweep, write result.json / result.csv
    orbits <config>          periodic-orbit scan and bending classification
    audit <result.json>      re-run the inequality audits on a stored result
    summary <result.json>    summary CSV/JSON, per-series text and figures
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from .flows import ValidationFailure, load_flow, validate
from .orbits import classify_bending, scan_orbits, write_polylines
from .sweep import (
    SweepResult,
    audit_inequalities,
    bending_table,
    emit_summary,
    load_config,
    run_sweep,
    write_result,
)

log = logging.getLogger("frontspeed")


def _orbit_options(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("orbits"):
        return {}
    s = parser["orbits"]
    opts = {}
    for key, conv in (("n_seeds", int), ("n_levels", int), ("T_max", float), ("tol", float)):
        if key in s:
            opts[key] = conv(s[key])
    return opts


def _directions(path) -> list:
    try:
        return [list(p) for p in load_config(path).directions]
    except (ValueError, configparser.Error):
        return []


def cmd_validate(args) -> int:
    flow = load_flow(args.config)
    report = validate(flow, tol=args.tol if args.tol is not None else 1e-10)
    print(json.dumps({"flow": flow.label(), **report.as_dict()}, indent=2))
    if args.config and Path(args.config).exists():
        try:
            load_config(args.config)
        except ValueError as exc:
            print(f"sweep section invalid: {exc}", file=sys.stderr)
            return 1
    return 0 if report.ok else 1


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, grid=args.grid, workers=args.workers, tol=args.tol, out=args.out)
    log.info("sweep %s: %d models x %d directions x %d amplitudes", cfg.flow.label(),
             len(cfg.models), len(cfg.directions), len(cfg.amplitudes))
    try:
        result = run_sweep(cfg)
    except ValidationFailure as exc:
        print(f"flow failed validation: {exc}", file=sys.stderr)
        return 2
    paths = write_result(result)
    for r in result.rows:
        speed = f"{r.speed:.6g}" if r.ok else f"FAILED ({r.reason})"
        print(f"{r.model:9s} p={tuple(round(c, 4) for c in r.p)} A={r.A:<8g} {speed}")
    print(f"audits: {'pass' if result.audits['pass'] else 'FAIL'}")
    print(f"wrote {paths['json']} and {paths['csv']}")
    return 0


def _classify(flow, opts):
    scan = scan_orbits(flow, keep_trajectories=False, **opts)
    return scan, classify_bending(flow, scan)


def cmd_orbits(args) -> int:
    flow = load_flow(args.config)
    if flow.dimension != 2:
        print("orbit scans need a 2D flow", file=sys.stderr)
        return 2
    opts = _orbit_options(args.config)
    if args.tol is not None:
        opts["tol"] = args.tol
    scan, cls = _classify(flow, opts)
    out = Path(args.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    payload = cls.as_dict()
    payload["flow"] = flow.label()
    payload["bending"] = bending_table(_directions(args.config), payload)
    path = out / "orbits.json"
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="\n")
    from .plotting import plot_orbits

    fig = plot_orbits(flow, scan.orbits, out / "figures" / "orbits.png")
    write_polylines(scan.orbits, out / "orbits")
    Q = "none" if cls.Q is None else f"({cls.Q[0]:.6f}, {cls.Q[1]:.6f})"
    print(f"{flow.label()}: case ({cls.case}), Q = {Q}, parallel = {cls.parallel}")
    for row in payload["bending"]:
        print(f"  p = {row['p']}: c_p = {row['cp']:.6g}{'  (bending)' if row['bending'] else ''}")
    print(f"wrote {path} and {fig}")
    return 0


def cmd_audit(args) -> int:
    result = SweepResult.load(args.result)
    report = audit_inequalities(result)
    for chk in report["checks"]:
        print(f"{'PASS' if chk['pass'] else 'FAIL'} {chk['check']}: {chk['statement']} ({len(chk['items'])} cells)")
    for cell in report["failed_cells"]:
        print(f"failed cell {cell['model']} p={cell['p']} A={cell['A']}: {cell['reason']}")
    out = Path(args.out) if args.out else Path(args.result).parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "audit.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8", newline="\n")
    return 0 if report["pass"] else 1


def cmd_summary(args) -> int:
    result = SweepResult.load(args.result)
    out = Path(args.out) if args.out else Path(args.result).parent
    orbit_file = Path(args.orbits) if args.orbits else Path(args.result).parent / "orbits.json"
    cls = None
    if orbit_file.exists():
        cls = json.loads(orbit_file.read_text(encoding="utf-8"))
    elif result.config.flow.dimension == 2 and not args.no_orbits:
        cls = _classify(result.config.flow, {})[1]
    paths = emit_summary(result, cls, out, figures=not args.no_figures)
    summary = json.loads(paths["json"].read_text(encoding="utf-8"))
    if summary["statement"]:
        print(f"{summary['flow']}: {summary['statement']}")
    for law in summary["laws"]:
        fit = law["fit"]
        if fit:
            extra = f", q = {fit['exponent']:.3f}" if fit.get("exponent") is not None else ""
            print(f"  {law['model']} p={law['p']}: {law['preferred']} (C = {fit['constant']:.4g}{extra}, r2 = {fit['r2']:.4f})")
    for name, path in paths.items():
        if not name.startswith("series:"):
            print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frontspeed", description="Front speeds of G, F and KPP models in periodic flows.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--grid", type=int, default=None, help="cells per axis (overrides the config)")
        p.add_argument("--workers", type=int, default=None, help="process pool size for sweep cells")
        p.add_argument("--tol", type=float, default=None, help="solver tolerance (overrides the config)")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("validate", help="validate the flow of a config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("orbits", help="periodic orbits and bending classification")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_orbits)

    p = sub.add_parser("audit", help="inequality audits of a stored sweep")
    p.add_argument("result")
    common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("summary", help="summary tables, series and figures")
    p.add_argument("result")
    p.add_argument("--orbits", default=None, help="orbits.json from the orbits verb")
    p.add_argument("--no-orbits", action="store_true", help="skip the orbit classification")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")
    common(p)
    p.set_defaults(func=cmd_summary)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
