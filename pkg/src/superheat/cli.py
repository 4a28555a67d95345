"""Command-line entry point: ``superheat <command> --config FILE``.

Commands: classify, simulate, certify, transform-check, norms, sweep.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 indeterminate verdict under --strict.
"""
from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .classify import INDETERMINATE, classify
from .errors import ConfigError, SuperheatError
from .evolve import (BlowupReport, EvolveConfig, build_supersolution, imex_evolve,
                     picard_monotone, weissler_certificate)
from .nonlinearity import parse_nonlinearity
from .singular import ConvexGrowth, exp_singular, power_singular
from .transforms import invariant_integral, quasi_scale, quasi_scaled_residual
from .uloc_grid import (ConstantExtension, Grid, Periodic, UlocParams, classification_integral,
                        load_field, save_field, uloc_norm)

SCHEMA_VERSION = 1
COMMANDS = ("classify", "simulate", "certify", "transform-check", "norms", "sweep")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INDETERMINATE = 0, 2, 3, 4

log = logging.getLogger("superheat")


# ---------------------------------------------------------------------------
# scenario parsing

def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def build_grid(spec: dict) -> Grid:
    dim = int(spec.get("dim", 1))
    if dim not in (1, 2, 3):
        raise ConfigError("grid dim must be 1, 2 or 3")
    b = spec.get("boundary", "periodic")
    if b == "periodic":
        boundary = Periodic()
    elif isinstance(b, dict) and "constant" in b:
        boundary = ConstantExtension(float(b["constant"]))
    else:
        raise ConfigError("boundary must be 'periodic' or {'constant': value}")
    n = int(_require(spec, "n"))
    lo, hi = float(spec.get("lo", -1.0)), float(spec.get("hi", 1.0))
    if not hi > lo or n < 4:
        raise ConfigError("grid needs hi > lo and n >= 4")
    return Grid.box(lo, hi, n, dim, boundary)


def build_growth(spec: dict) -> ConvexGrowth:
    kind = spec.get("g", "identity")
    s0 = float(spec.get("s0", 1.0))
    alpha = float(spec.get("alpha", 6.0))
    if kind == "identity":
        return ConvexGrowth.identity(s0, alpha)
    if kind == "square":
        return ConvexGrowth.square(s0, alpha)
    raise ConfigError("g must be 'identity' or 'square'")


def build_data(cfg: dict, nl=None):
    """Initial data described by cfg['data'] on cfg['grid'] (or loaded from a file)."""
    data = cfg.get("data", {"kind": "bump"})
    kind = data.get("kind", "bump")
    if kind == "file":
        path = Path(_require(data, "path"))
        if not path.exists():
            raise ConfigError(f"field file {path} does not exist")
        return load_field(path)
    grid = build_grid(_require(cfg, "grid"))
    if kind == "bump":
        amp = float(data.get("amplitude", 1.0))
        width = float(data.get("width", 1.0))
        base = float(data.get("offset", 0.0))
        return grid.sample(lambda *xs: base + amp * np.exp(-sum(x * x for x in xs) / width ** 2))
    if kind == "constant":
        c = float(_require(data, "value"))
        return grid.sample(lambda *xs: np.full(np.shape(xs[0]), c))
    if kind == "exp_singular":
        return exp_singular(build_growth(data), float(data.get("alpha", 6.0)), grid)
    if kind == "power_singular":
        if nl is None:
            raise ConfigError("power_singular data needs a nonlinearity")
        return power_singular(nl, float(_require(data, "r")), cfg.get("N"), grid,
                              kappa=data.get("kappa"))
    raise ConfigError(f"unknown data kind {kind!r}")


def build_solver(cfg: dict) -> EvolveConfig:
    s = dict(cfg.get("solver", {}))
    try:
        return EvolveConfig(**{k: v for k, v in s.items() if k != "method"})
    except TypeError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc


# ---------------------------------------------------------------------------
# output helpers

def _plain(obj):
    """JSON-ready copy: dataclasses, numpy scalars/arrays and tuples unwrapped."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def fmt(x) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_plain(payload), indent=1, sort_keys=True) + "\n")


def write_csv(path: Path, rows: list):
    if not rows:
        return
    cols = list(rows[0].keys())
    for r in rows[1:]:
        cols += [c for c in r if c not in cols]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in cols])


# ---------------------------------------------------------------------------
# commands; each returns (summary dict, table rows, status code)

def cmd_classify(cfg, out: Path | None):
    nl = parse_nonlinearity(_require(cfg, "nonlinearity"))
    u0 = build_data(cfg, nl)
    N = int(cfg.get("N", u0.dim))
    r, rho = float(_require(cfg, "r")), float(cfg.get("rho", 0.5))
    v = classify(nl, u0, N, r, rho, float(cfg.get("gamma", 1.0)), float(cfg.get("epsilon", 0.1)))
    row = {"nonlinearity": nl.name, "N": N, "r": r, "rho": rho, "regime": v.regime,
           "theorem": v.theorem, "integral": float(v.inputs["integral"]),
           "trend": v.inputs["trend"],
           "T_lower": v.time_bound.T_lower if v.time_bound else ""}
    status = EXIT_INDETERMINATE if v.regime == INDETERMINATE else EXIT_OK
    return {"verdict": v.to_dict()}, [row], status


def cmd_simulate(cfg, out):
    nl = parse_nonlinearity(_require(cfg, "nonlinearity"))
    u0 = build_data(cfg, nl)
    scfg = build_solver(cfg)
    method = cfg.get("solver", {}).get("method", "imex")
    if method == "imex":
        res = imex_evolve(u0, nl, scfg)
    elif method == "picard":
        res = picard_monotone(u0, nl, scfg)
    elif method == "supersolution":
        res = build_supersolution(u0, nl, scfg)
    else:
        raise ConfigError("solver.method must be imex, picard or supersolution")
    frames = None
    if isinstance(res, BlowupReport):
        summary = {"blowup": res.summary()}
        frames = res.frames
        row = {"method": method, "blowup_time": res.time, "max_value": res.max_value}
    elif method == "picard":
        frames = res.limit
        summary = {"status": res.status, "monotone": all(res.monotone_flags),
                   "iterations": len(res.gaps), "sup_gap": res.sup_gap, "gaps": res.gaps,
                   "final_max": float(frames.final().values.max())}
        row = {"method": method, "status": res.status, "sup_gap": res.sup_gap,
               "final_max": summary["final_max"]}
    elif method == "supersolution":
        frames = res.field
        summary = {"min_residual": res.min_residual, "verified": res.verified, "A": res.A,
                   "s1": res.s1, "branch": res.branch}
        row = {"method": method, "min_residual": res.min_residual, "verified": res.verified}
    else:
        frames = res
        summary = {"final_time": frames.times[-1], "final_max": float(frames.final().values.max())}
        row = {"method": method, **summary}
    stride = int(cfg.get("dump_stride", 0))
    if out is not None and stride > 0 and frames is not None:
        for i in range(0, len(frames), stride):
            save_field(frames[i], out / f"frame_{i:05d}.json")
    return summary, [row], EXIT_OK


def cmd_certify(cfg, out):
    cert_cfg = cfg.get("certify", {})
    data = dict(cfg.get("data", {}))
    data.setdefault("kind", "exp_singular")
    cfg = {**cfg, "data": data}
    g = build_growth(data)
    u0 = build_data(cfg)
    times = [float(t) for t in cert_cfg.get("times", [1e-2, 1e-3, 1e-4, 1e-5])]
    cert = weissler_certificate(u0, g, int(cert_cfg.get("k", 2)), times)
    rows = [{"t": t, "lhs": lh, "rhs": rh, "violated": lh > rh}
            for t, lh, rh in zip(cert.times, cert.lhs, cert.rhs)]
    return {"certificate": cert.summary()}, rows, EXIT_OK


def cmd_transform_check(cfg, out):
    nl = parse_nonlinearity(_require(cfg, "nonlinearity"))
    u0 = build_data(cfg, nl)
    lam = float(cfg.get("transform", {}).get("lambda", 2.0))
    N = int(cfg.get("N", u0.dim))
    scaled = quasi_scale(u0, nl, lam)
    g = u0.grid
    lo = tuple(g.origin)
    hi = tuple(o + L for o, L in zip(g.origin, g.lengths))
    if lam >= 1:
        region = (tuple(a / lam for a in lo), tuple(b / lam for b in hi))
        I_scaled, I_orig = invariant_integral(scaled, nl, N, region), invariant_integral(u0, nl, N)
    else:
        region = (tuple(a * lam for a in lo), tuple(b * lam for b in hi))
        I_scaled, I_orig = invariant_integral(scaled, nl, N), invariant_integral(u0, nl, N, region)
    summary = {"lambda": lam, "invariant_scaled": I_scaled, "invariant_original": I_orig,
               "relative_drift": abs(I_scaled - I_orig) / abs(I_orig)}
    if "solver" in cfg:
        sol = imex_evolve(u0, nl, build_solver(cfg))
        if isinstance(sol, BlowupReport):
            raise SuperheatError("solution blew up before the residual check")
        rep = quasi_scaled_residual(sol, nl, lam)
        summary["residual"] = rep.summary()
        if out is not None:
            save_field(rep.residual_field, out / "residual_field.json")
    return summary, [{"lambda": lam, **{k: v for k, v in summary.items() if k != "residual"}}], \
        EXIT_OK


def cmd_norms(cfg, out):
    nl = parse_nonlinearity(cfg["nonlinearity"]) if "nonlinearity" in cfg else None
    u0 = build_data(cfg, nl)
    ncfg = cfg.get("norms", {})
    rho = float(ncfg.get("rho", cfg.get("rho", 0.5)))
    rows = []
    for p in ncfg.get("p", [1]):
        p_val = math.inf if str(p) in ("inf", "Infinity") else float(p)
        rows.append({"p": fmt(p_val), "rho": rho, "norm": uloc_norm(u0, UlocParams(p_val, rho))})
    summary = {"norms": rows}
    if nl is not None and "r" in cfg:
        summary["classification_integral"] = classification_integral(u0, nl, float(cfg["r"]), rho)
    return summary, rows, EXIT_OK


HANDLERS = {"classify": cmd_classify, "simulate": cmd_simulate, "certify": cmd_certify,
            "transform-check": cmd_transform_check, "norms": cmd_norms}


def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    d = cfg
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _point_name(coords: dict) -> str:
    return "_".join(f"{k.replace('.', '-')}={fmt(v)}" for k, v in coords.items())


def _run_point(args):
    command, cfg, coords, out = args
    np.random.seed(int(cfg.get("seed", 0)))
    try:
        summary, rows, status = HANDLERS[command](cfg, None)
        error = None
    except SuperheatError as exc:
        summary, rows, status, error = {}, [{}], (
            EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_NUMERIC), f"{type(exc).__name__}: {exc}"
    if out is not None:
        write_json(Path(out) / f"point_{_point_name(coords)}.json",
                   {"schema_version": SCHEMA_VERSION, "coords": coords, "summary": summary,
                    "error": error})
    return coords, rows, status, error


def cmd_sweep(cfg, out, jobs: int = 1):
    sweep = _require(cfg, "sweep")
    command = _require(sweep, "command")
    if command not in HANDLERS:
        raise ConfigError(f"sweep command must be one of {sorted(HANDLERS)}")
    over = _require(sweep, "over")
    keys = list(over)
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    tasks = []
    for combo in itertools.product(*(over[k] for k in keys)):
        point = copy.deepcopy(base)
        coords = dict(zip(keys, combo))
        for k, v in coords.items():
            _set_path(point, k, v)
        tasks.append((command, point, coords, str(out) if out is not None else None))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]
    rows, statuses, errors = [], [], []
    for coords, prow, status, error in results:
        for r in prow:
            rows.append({**coords, **r, "status": status, "error": error or ""})
        statuses.append(status)
        if error:
            errors.append({"coords": coords, "error": error})
    worst = max(statuses) if statuses else EXIT_OK
    status = EXIT_INDETERMINATE if worst == EXIT_INDETERMINATE else (
        EXIT_NUMERIC if any(s in (EXIT_CONFIG, EXIT_NUMERIC) for s in statuses) else EXIT_OK)
    return {"command": command, "points": len(tasks), "errors": errors}, rows, status


# ---------------------------------------------------------------------------

def run(command: str, cfg: dict, out: Path | None = None, jobs: int = 1,
        strict: bool = False) -> int:
    """Run one command; writes summary.json and table.csv under ``out``."""
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    np.random.seed(int(cfg.get("seed", 0)))
    error = None
    try:
        if cfg.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {cfg['schema_version']!r}; "
                              f"this build reads version {SCHEMA_VERSION}")
        if command == "sweep":
            summary, rows, status = cmd_sweep(cfg, out, jobs)
        else:
            summary, rows, status = HANDLERS[command](cfg, out)
    except ConfigError as exc:
        summary, rows, status, error = {}, [], EXIT_CONFIG, exc
    except SuperheatError as exc:
        summary, rows, status, error = {}, [], EXIT_NUMERIC, exc
    if status == EXIT_INDETERMINATE and not strict:
        status = EXIT_OK
    payload = {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg,
               "backend": _backend.NAME, "result": summary, "exit_status": status,
               "error": None if error is None else {"type": type(error).__name__,
                                                    "message": str(error)},
               "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    if out is not None:
        write_json(out / "summary.json", payload)
        write_csv(out / "table.csv", rows)
    else:
        sys.stdout.write(json.dumps(_plain(payload), indent=1, sort_keys=True) + "\n")
    if error is not None:
        sys.stderr.write(f"superheat: {type(error).__name__}: {error}\n")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="superheat", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="scenario file (JSON)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    parser.add_argument("--strict", action="store_true",
                        help="exit 4 when a verdict is Indeterminate")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"superheat: cannot read config: {exc}\n")
        return EXIT_CONFIG
    if args.jobs < 1:
        sys.stderr.write("superheat: --jobs must be >= 1\n")
        return EXIT_CONFIG
    return run(args.command, cfg, args.out, args.jobs, args.strict)


if __name__ == "__main__":
    sys.exit(main())
