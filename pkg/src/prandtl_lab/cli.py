"""Command-line driver: ``prandtl-lab {blasius,march,spectrum,accept,list-checks}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import acceptance
from .blasius import default_table, solve_blasius
from .diagnostics import (StationRecorder, comparison_envelope, fit_decay_rate,
                          pointwise_bound_ratio)
from .errors import ConfigError, PrandtlLabError
from .initial_data import build_profile, check_admissibility
from .march import MarchConfig, run
from .spectrum import (assemble_L, default_Y_grid, eigen_principal, eigenrelation_residual,
                       export_eigenpair, wbar_profile)
from .vonmises import blasius_w

OUT_ENV = "PRANDTL_LAB_OUT"

SCHEMA = {
    "type": "object",
    "required": ["name", "profile"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "profile": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["blasius", "shifted_blasius", "perturbed_blasius",
                                  "barrier_seed", "order_one", "general"]},
                "A": {"type": "number", "exclusiveMinimum": 0},
                "kappa": {"type": "number", "minimum": 0},
                "shape": {"enum": ["bump2", "bump4"]},
                "sign": {"enum": ["+", "-"]},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "depth": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "y": {"type": "array", "items": {"type": "number"}},
                "u": {"type": "array", "items": {"type": "number"}},
            },
        },
        "march": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "X_end": {"type": "number", "exclusiveMinimum": 0},
                "n_nodes": {"type": "integer", "minimum": 256},
                "psi_max": {"type": "number", "exclusiveMinimum": 0},
                "stretch": {"type": "number", "minimum": 1},
                "dX0": {"type": "number", "exclusiveMinimum": 0},
                "step_growth": {"type": "number", "minimum": 1},
                "max_step_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
                "picard_iters": {"type": "integer", "minimum": 2},
                "clip_floor": {"type": "number", "minimum": 0, "maximum": 1e-14},
                "scheme": {"enum": ["bdf2", "euler"]},
                "reports_per_doubling": {"type": "integer", "minimum": 1},
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alphas": {"type": "array", "items": {"type": "number", "minimum": 0},
                           "minItems": 1},
                "fit_window": {"type": "array", "items": {"type": "number", "minimum": 0},
                               "minItems": 2, "maxItems": 2},
                "energies": {"type": "boolean"},
                "snapshots": {"type": "boolean"},
            },
        },
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "n_nodes": {"type": "integer", "minimum": 64},
                "shift": {"type": "number"},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "exact_error_max": {"type": "number", "exclusiveMinimum": 0},
                "slope_range": {"type": "array", "items": {"type": "number"},
                                "minItems": 2, "maxItems": 2},
                "envelope": {"type": "boolean"},
            },
        },
        "output": {"type": "string"},
        "seed": {"type": "integer"},
    },
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dump(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2)


def bundled_configs():
    root = resources.files("prandtl_lab") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(source):
    """Load one or more experiment configs from a path or a bundled name."""
    path = Path(source)
    if not path.exists():
        bundled = resources.files("prandtl_lab") / "configs" / f"{source}.json"
        if not bundled.is_file():
            raise ConfigError(f"no config file or bundled config named {source!r}")
        text = bundled.read_text()
    else:
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}")
    items = data.get("experiments", [data]) if isinstance(data, dict) else data
    for item in items:
        validate_config(item)
    return items


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}")
    try:
        MarchConfig(**cfg.get("march", {}))
    except ValueError as exc:
        raise ConfigError(f"march: {exc}")


def run_experiment(cfg, out_dir=None):
    """Run one experiment; returns ``(exit_status, summary)`` and writes artifacts."""
    validate_config(cfg)
    out = Path(os.environ.get(OUT_ENV) or out_dir or cfg.get("output") or "out") / cfg["name"]
    out.mkdir(parents=True, exist_ok=True)
    np.random.seed(cfg.get("seed", 0))
    table = default_table()
    diag = cfg.get("diagnostics", {})
    try:
        profile = build_profile(table, cfg["profile"])
        march_cfg = MarchConfig(**cfg.get("march", {}))
        report = check_admissibility(profile)
        profile.write_sidecar(out / "profile.json", report)
        rec = StationRecorder(table, alphas=diag.get("alphas", (19 / 20, 1.0)),
                              energies=diag.get("energies", False))
        result = run(profile, march_cfg, [rec])
    except PrandtlLabError as exc:
        raise type(exc)(f"experiment {cfg['name']!r}: {exc}") from exc

    rec.to_csv(out / "stations.csv")
    if diag.get("snapshots"):
        snap_dir = out / "fields"
        snap_dir.mkdir(exist_ok=True)
        for snap in result.snapshots:
            snap.to_csv(snap_dir)

    reports = []
    for snap in result.snapshots:
        wbar = blasius_w(table, snap.station, snap.grid)
        if snap.station >= 1:
            reports.append(pointwise_bound_ratio(snap, wbar).to_dict())
        reports.append(comparison_envelope(snap, wbar).to_dict())
    _dump(out / "reports.json", reports)

    checks = {}
    targets = cfg.get("checks", {})
    final = result.final.w
    if "exact_error_max" in targets:
        offset = cfg["profile"].get("A", 1.0) if cfg["profile"]["kind"] in (
            "shifted_blasius", "blasius") else None
        if offset is None:
            raise ConfigError("exact_error_max needs a blasius or shifted_blasius profile")
        exact = blasius_w(table, final.station, final.grid, offset=offset)
        err = float(np.max(np.abs(final.values - exact.values)))
        checks["exact_error"] = {"value": err, "limit": targets["exact_error_max"],
                                 "passed": err <= targets["exact_error_max"]}
    if "slope_range" in targets:
        window = tuple(diag.get("fit_window", (march_cfg.X_end / 100.0, march_cfg.X_end)))
        x = rec.stations
        fits = {}
        for col in ("sup_gap_vonmises", "sup_gap_physical"):
            fit = fit_decay_rate(x[x > 0], rec.column(col)[x > 0], window)
            fits[col] = fit.to_dict()
        lo, hi = targets["slope_range"]
        _dump(out / "slopes.json", fits)
        checks["slope"] = {"fits": fits, "range": [lo, hi],
                           "passed": all(lo <= f["slope"] <= hi for f in fits.values())}
    if targets.get("envelope"):
        margins = (min(rec.column("envelope_lower")), min(rec.column("envelope_upper")))
        checks["envelope"] = {"margins": margins, "passed": min(margins) >= 1.0}
    if cfg.get("spectrum", {}).get("enabled"):
        sp = cfg["spectrum"]
        checks["spectrum"] = _spectrum_study(table, sp.get("n_nodes", 4096),
                                             sp.get("shift", 1.0), out)

    summary = {"name": cfg["name"], "X_end": march_cfg.X_end,
               "steps": result.final.steps_taken, "clip_max": result.final.clip_max,
               "admissibility": asdict(report),
               "final_sup_gap": rec.rows[-1]["sup_gap_vonmises"], "checks": checks}
    _dump(out / "summary.json", summary)
    status = 0 if all(c["passed"] for c in checks.values()) else 1
    return status, summary


def _spectrum_study(table, n, shift, out):
    grid = default_Y_grid(n)
    W, _ = wbar_profile(table, grid)
    op = assemble_L(W, table)
    pair = eigen_principal(op, shift=shift)
    export_eigenpair(pair, op, table, out / "eigenpair.csv", out / "eigenpair.json")
    return {"eigenvalue": pair.eigenvalue, "residual": eigenrelation_residual(op, table),
            "positive": bool(np.all(pair.vector[1:-1] > 0)),
            "passed": abs(pair.eigenvalue - 1.0) <= 0.05}


def _cmd_blasius(args):
    table = solve_blasius(eta_max=args.eta_max, step=args.step)
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "blasius.csv")
    info = {"fpp0": table.fpp0, "far_field_miss": abs(table.fp[-1] - 1.0),
            "displacement": table.displacement, "nodes": int(table.nodes.size)}
    print(json.dumps(info) if args.json else
          f"f''(0) = {table.fpp0:.12f}   |f'(eta_max) - 1| = {info['far_field_miss']:.2e}")
    return 0


def _cmd_march(args):
    configs = load_config(args.config)
    if args.parallel > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(run_experiment, configs, [args.out] * len(configs)))
    else:
        results = [run_experiment(c, args.out) for c in configs]
    for status, summary in results:
        if args.json:
            print(json.dumps(_jsonable(summary)))
        else:
            flags = ", ".join(f"{k}={'pass' if v['passed'] else 'FAIL'}"
                              for k, v in summary["checks"].items())
            print(f"{summary['name']}: final sup gap {summary['final_sup_gap']:.3e}"
                  + (f" [{flags}]" if flags else ""))
    return max(s for s, _ in results)


def _cmd_spectrum(args):
    table = default_table()
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    res = _spectrum_study(table, args.nodes, args.shift, out)
    print(json.dumps(_jsonable(res)) if args.json else
          f"eigenvalue {res['eigenvalue']:.8f}  eigenrelation residual {res['residual']:.3e}  "
          f"positive eigenvector: {res['positive']}")
    return 0 if res["passed"] else 1


def _cmd_accept(args):
    ids = set(args.checks.split(",")) if args.checks else None
    results = acceptance.run_all(ids)
    for r in results:
        print(r.line())
    if args.out or os.environ.get(OUT_ENV):
        out = Path(args.out or os.environ[OUT_ENV])
        out.mkdir(parents=True, exist_ok=True)
        _dump(out / "summary.json", [{"id": r.id, "passed": r.passed, "runtime": r.runtime,
                                      "measured": r.measured} for r in results])
    if args.json:
        print(json.dumps(_jsonable([{"id": r.id, "passed": r.passed, "measured": r.measured}
                                    for r in results])))
    return 0 if all(r.passed for r in results) else 1


def _cmd_list_checks(args):
    if args.json:
        print(json.dumps([{"id": c.id, "description": c.title, "anchor": c.anchor}
                          for c in acceptance.CHECKS]))
    else:
        width = max(len(c.id) for c in acceptance.CHECKS)
        for i, c in enumerate(acceptance.CHECKS, 1):
            print(f"{i:2d}  {c.id:<{width}}  {c.title}  [{c.anchor}]")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="prandtl-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = common(sub.add_parser("blasius", help="solve and dump the Blasius table"))
    p.add_argument("--eta-max", type=float, default=12.0)
    p.add_argument("--step", type=float, default=1e-4)
    p.set_defaults(func=_cmd_blasius)

    p = common(sub.add_parser("march", help="run the experiments of a config"))
    p.add_argument("--config", required=True,
                   help=f"JSON file or bundled name ({', '.join(bundled_configs())})")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=_cmd_march)

    p = common(sub.add_parser("spectrum", help="eigenpair study of the linearized operator"))
    p.add_argument("--nodes", type=int, default=4096)
    p.add_argument("--shift", type=float, default=1.0)
    p.set_defaults(func=_cmd_spectrum)

    p = common(sub.add_parser("accept", help="run the acceptance suite"))
    p.add_argument("--checks", help="comma-separated subset of check ids")
    p.set_defaults(func=_cmd_accept)

    p = common(sub.add_parser("list-checks", help="list acceptance checks"))
    p.set_defaults(func=_cmd_list_checks)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PrandtlLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
