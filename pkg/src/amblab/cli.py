"""Command line front end: ``amblab <command> [options]``.

Exit codes: 0 ok, 1 verification failure, 2 I/O error, 3 schema or
configuration error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from . import functionals as fn
from . import io
from . import optimizers as opt
from . import tf
from . import verify
from .domains import Interval, domain_from_json, rasterize_time
from .errors import AmblabError, NoConvergence, NonFiniteObjective, SchemaError
from .tf import PhasePoint, TimeGrid

log = logging.getLogger("amblab")

EXIT_OK, EXIT_VERIFY, EXIT_IO, EXIT_SCHEMA, EXIT_DIVERGED = 0, 1, 2, 3, 4


# -- run configuration -----------------------------------------------------------

@dataclass
class Outputs:
    dir: str = "amblab_out"
    write_ambiguity: bool = False
    write_report: bool = True


@dataclass
class RunConfig:
    grid: TimeGrid
    objective: object
    optimizer: opt.OptimizerConfig = field(default_factory=opt.OptimizerConfig)
    outputs: Outputs = field(default_factory=Outputs)
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return d[key]


def _check_keys(d: dict, allowed: set, where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise SchemaError(f"{where}: unknown field(s) {sorted(extra)}")


def parse_grid(d) -> TimeGrid:
    try:
        return TimeGrid(int(_require(d, "n", "grid")), float(_require(d, "dx", "grid")))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"grid: {exc}") from exc


def _window_from(path: Optional[str], grid: TimeGrid):
    if path is None:
        return None
    w = io.read_signal(path)
    if w.grid != grid:
        raise SchemaError(f"window {path} is sampled on {w.grid}, run grid is {grid}")
    return w


def parse_objective(d, grid: TimeGrid):
    kind = _require(d, "kind", "objective")
    try:
        if kind == "ambiguity_lp":
            _check_keys(d, {"kind", "p", "domain"}, "objective")
            return fn.AmbiguityLp(float(d["p"]), domain_from_json(d["domain"]))
        if kind == "ambiguity_linf":
            _check_keys(d, {"kind", "domain"}, "objective")
            return fn.AmbiguityLinf(domain_from_json(d["domain"]))
        if kind == "timecorr_lp":
            _check_keys(d, {"kind", "p", "interval"}, "objective")
            a, b = d["interval"]
            return fn.TimeCorrelationLp(float(d["p"]), Interval(float(a), float(b)))
        if kind == "fixed_window_lp":
            _check_keys(d, {"kind", "p", "domain", "window"}, "objective")
            return fn.FixedWindowLp(float(d["p"]), domain_from_json(d["domain"]),
                                    _window_from(d.get("window"), grid))
        if kind == "mq_lp":
            _check_keys(d, {"kind", "p", "q", "domain", "window", "norm"}, "objective")
            norm = d.get("norm", "continuous")
            if isinstance(norm, dict):
                norm = fn.GaborLattice(float(norm["a"]), float(norm["b"]), norm.get("R"))
            elif norm == "gabor":
                norm = fn.GaborLattice.default(grid)
            elif norm != "continuous":
                raise SchemaError(f"objective: unknown norm {norm!r}")
            return fn.MqNormalizedLp(float(d["p"]), float(d["q"]), domain_from_json(d["domain"]),
                                     _window_from(d.get("window"), grid), norm)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"objective {kind!r}: {exc}") from exc
    raise SchemaError(f"unknown objective kind {kind!r}")


def parse_optimizer(d: dict, seed: int) -> opt.OptimizerConfig:
    d = dict(d or {})
    start = d.pop("start", None) or {}
    allowed = {f for f in opt.OptimizerConfig.__dataclass_fields__} - {"start", "seed"}
    _check_keys(d, allowed, "optimizer")
    try:
        return opt.OptimizerConfig(**d, seed=seed, start=opt.Start(**start))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"optimizer: {exc}") from exc


def load_config(path, overrides: Optional[argparse.Namespace] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be an object")
    _check_keys(raw, {"grid", "objective", "optimizer", "outputs", "seed", "scan"}, "config")
    raw = _apply_overrides(raw, overrides)
    grid = parse_grid(_require(raw, "grid", "config"))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SchemaError("config: seed must be an integer")
    objective = parse_objective(_require(raw, "objective", "config"), grid)
    out = raw.get("outputs", {})
    _check_keys(out, {"dir", "write_ambiguity", "write_report"}, "outputs")
    outputs = Outputs(**out)
    return RunConfig(grid, objective, parse_optimizer(raw.get("optimizer"), seed), outputs, seed, raw)


def _apply_overrides(raw: dict, ns: Optional[argparse.Namespace]) -> dict:
    raw = json.loads(json.dumps(raw))
    if ns is None:
        return raw
    if getattr(ns, "seed", None) is not None:
        raw["seed"] = ns.seed
    grid = raw.setdefault("grid", {})
    if getattr(ns, "grid_n", None) is not None:
        grid["n"] = ns.grid_n
    if getattr(ns, "grid_dx", None) is not None:
        grid["dx"] = ns.grid_dx
    if getattr(ns, "out", None) is not None:
        raw.setdefault("outputs", {})["dir"] = ns.out
    return raw


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


# -- artifacts ----------------------------------------------------------------------

def dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_manifest(out: Path, command: str, raw: dict, wall: float) -> None:
    dump_json(out / "manifest.json", {
        "command": command,
        "config_sha256": config_hash(raw),
        "versions": {
            "amblab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall,
    })


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid_from_flags(ns, fallback: TimeGrid) -> None:
    """Reject flags that contradict the grid stored with an input file."""
    if ns.grid_n is not None and ns.grid_n != fallback.n:
        raise SchemaError(f"--grid-n {ns.grid_n} contradicts the input grid n={fallback.n}")
    if ns.grid_dx is not None and abs(ns.grid_dx - fallback.dx) > 1e-12 * fallback.dx:
        raise SchemaError(f"--grid-dx {ns.grid_dx} contradicts the input grid dx={fallback.dx}")


# -- commands -----------------------------------------------------------------------

def cmd_ambiguity(ns) -> int:
    t0 = time.perf_counter()
    f = io.read_signal(ns.signal)
    _grid_from_flags(ns, f.grid)
    out = _out_dir(ns.out)
    io.write_tfarray(out / "ambiguity.csv", tf.ambiguity(f))
    write_manifest(out, "ambiguity", {"signal": str(ns.signal), "grid": f.grid.to_json()},
                   time.perf_counter() - t0)
    return EXIT_OK


def cmd_stft(ns) -> int:
    t0 = time.perf_counter()
    f = io.read_signal(ns.signal)
    _grid_from_flags(ns, f.grid)
    g = _window_from(ns.window, f.grid) if ns.window else tf.gaussian(f.grid)
    out = _out_dir(ns.out)
    io.write_tfarray(out / "stft.csv", tf.stft(f, g))
    write_manifest(out, "stft", {"signal": str(ns.signal), "window": ns.window, "grid": f.grid.to_json()},
                   time.perf_counter() - t0)
    return EXIT_OK


def run_optimizer(cfg: RunConfig) -> opt.RunReport:
    spec, oc, grid = cfg.objective, cfg.optimizer, cfg.grid
    if oc.method == "ProjGrad":
        return opt.proj_grad_ascent(spec, oc, grid)
    if oc.method == "SelfConsistent":
        if not isinstance(spec, fn.AmbiguityLp):
            raise SchemaError("SelfConsistent needs an ambiguity_lp objective")
        return opt.self_consistent(fn.mask_for(spec.domain, grid), oc, spec.p)
    if oc.method == "PowerIter":
        if not isinstance(spec, fn.FixedWindowLp) or spec.p != 2:
            raise SchemaError("PowerIter needs a fixed_window_lp objective with p = 2")
        t0 = time.perf_counter()
        g = fn._window(spec.window, grid)
        lam, v = opt.power_iteration(g, fn.mask_for(spec.domain, grid), tol=oc.tol_grad,
                                     seed=oc.seed, max_iters=oc.max_iters)
        J = fn.evaluate(spec, v)
        return opt.RunReport([J], [fn.gradient(spec, v).norm()], [], v, "Converged",
                             time.perf_counter() - t0, oc.seed, "PowerIter")
    raise SchemaError("GaussianScan runs through the 'scan' command")


def cmd_optimize(ns) -> int:
    t0 = time.perf_counter()
    cfg = load_config(ns.config, ns)
    out = _out_dir(cfg.outputs.dir)
    report = run_optimizer(cfg)
    if cfg.outputs.write_report:
        dump_json(out / "report.json", report.to_json())
    io.write_signal(out / "signal.csv", report.final_signal)
    if cfg.outputs.write_ambiguity:
        io.write_tfarray(out / "ambiguity.csv", tf.ambiguity(report.final_signal))
    write_manifest(out, "optimize", cfg.raw, time.perf_counter() - t0)
    if not ns.quiet:
        print(f"{report.method}: {report.status} after {len(report.objective_trace) - 1} iterations, "
              f"objective {report.final_objective:.12g}")
    return EXIT_OK


def cmd_scan(ns) -> int:
    t0 = time.perf_counter()
    cfg = load_config(ns.config, ns)
    scan = cfg.raw.get("scan", {})
    lams = ns.lams if ns.lams else scan.get("lams", [0.25, 0.5, 1.0, 2.0, 4.0])
    centers = [PhasePoint(float(x), float(w)) for x, w in scan.get("centers", [[0.0, 0.0]])]
    best, params = opt.gaussian_family_scan(cfg.objective, cfg.grid, lams, centers)
    out = _out_dir(cfg.outputs.dir)
    z = params["center"]
    dump_json(out / "scan.json", {"best_objective": best, "lam": params["lam"], "center": [z.x, z.omega],
                                  "lams": sorted(map(float, lams))})
    write_manifest(out, "scan", {**cfg.raw, "scan": {"lams": list(lams)}}, time.perf_counter() - t0)
    if not ns.quiet:
        print(f"best Gaussian: lam={params['lam']:g}, center=({z.x:g}, {z.omega:g}), objective {best:.12g}")
    return EXIT_OK


def cmd_timecorr(ns) -> int:
    t0 = time.perf_counter()
    a, b = ns.interval
    spec = Interval(a, b)
    if ns.signal:
        f = io.read_signal(ns.signal)
        _grid_from_flags(ns, f.grid)
        result = {"signal": str(ns.signal), "objective": fn.objective_timecorr(f, rasterize_time(spec, f.grid), ns.p)}
    else:
        grid = TimeGrid(ns.grid_n or 1024, ns.grid_dx or 1 / 32)
        report = verify.check_nonattainment_timecorr(spec, ns.p, ns.lams, grid)
        result = report.to_json()
    out = _out_dir(ns.out)
    dump_json(out / "timecorr.json", result)
    write_manifest(out, "timecorr", {"interval": [a, b], "p": ns.p, "lams": ns.lams, "signal": ns.signal},
                   time.perf_counter() - t0)
    if not ns.quiet:
        print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_verify(ns) -> int:
    t0 = time.perf_counter()
    names = list(verify.SUITES) if ns.suites == ["all"] else ns.suites
    unknown = [n for n in names if n not in verify.SUITES]
    if unknown:
        raise SchemaError(f"unknown suite(s): {', '.join(unknown)}; known: {', '.join(verify.SUITES)}")
    seed = ns.seed if ns.seed is not None else 0
    reports = verify.run_suites(names, seed)
    out = _out_dir(ns.out)
    dump_json(out / "verify.json", [r.to_json() for r in reports])
    write_manifest(out, "verify", {"suites": names, "seed": seed}, time.perf_counter() - t0)
    if not ns.quiet:
        print(verify.summary_table(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--grid-n", type=int)
    common.add_argument("--grid-dx", type=float)
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="amblab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"amblab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ambiguity", parents=[common], help="ambiguity function of a signal CSV")
    p.add_argument("signal")
    p.set_defaults(func=cmd_ambiguity)

    p = sub.add_parser("stft", parents=[common], help="STFT of a signal CSV")
    p.add_argument("signal")
    p.add_argument("--window", help="window signal CSV (default: unit Gaussian)")
    p.set_defaults(func=cmd_stft)

    p = sub.add_parser("optimize", parents=[common], help="maximize a concentration objective")
    p.set_defaults(func=cmd_optimize, needs_config=True)

    p = sub.add_parser("scan", parents=[common], help="best dilated/shifted Gaussian for an objective")
    p.add_argument("--lams", type=float, nargs="+")
    p.set_defaults(func=cmd_scan, needs_config=True)

    p = sub.add_parser("timecorr", parents=[common], help="time-correlation objective")
    p.add_argument("--signal", help="signal CSV; without it, sweep normalized interval indicators")
    p.add_argument("--interval", type=float, nargs=2, default=[0.0, 1.0], metavar=("A", "B"))
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--lams", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0])
    p.set_defaults(func=cmd_timecorr)

    p = sub.add_parser("verify", parents=[common], help="run verification checks")
    p.add_argument("suites", nargs="+", help="check names or 'all'")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if ns.quiet else logging.INFO, format="%(levelname)s %(message)s")
    if getattr(ns, "needs_config", False) and not ns.config:
        parser.error(f"{ns.command} needs --config")
    if ns.out is None and not getattr(ns, "needs_config", False):
        ns.out = "amblab_out"
    try:
        return ns.func(ns)
    except (NonFiniteObjective, NoConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SchemaError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AmblabError, ValueError) as exc:
        # domain errors raised while building the run from a config
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
