"""Command-line interface: ``lsjunction {run,sweep,tabulate,plot,validate}``.

Exit codes: 0 success, 2 bad input (config, arguments, wetting limit),
3 solver or measurement failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np

from . import __version__, analytic
from .analytic import WettingLimitError
from .contour import NoInterfaceError
from .evolution import Formulation, SolverConfig, SolverError
from .grid import write_vtk
from .measure import MeasurementError, sample_profile, write_profile_csv, write_tj_csv
from .scenarios import (GarckeScenario, MeasureConfig, SweepSpec, TABLE1_PAIRS, YOUNG_LAMBDAS, YoungScenario,
                        infer_gamma_from_measurement, read_results, run_garcke, run_sweep, run_young,
                        young_prediction)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3
TABLE2_R_LAMBDA = (1e-3, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0, 1e2, 1e3)

log = logging.getLogger("lsjunction")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


# ---------------------------------------------------------------- config

SECTIONS = ("grid", "solver", "scenario", "measure", "sweep", "output")


def load_config(path: str) -> dict:
    """Read a JSON config; syntax errors are reported with line and column."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1:1: top level must be an object with sections {', '.join(SECTIONS)}")
    unknown = set(cfg) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}; expected {list(SECTIONS)}")
    for k, v in cfg.items():
        if not isinstance(v, dict):
            raise ConfigError(f"{path}: section [{k}] must be an object")
    return cfg


def _take(section: dict, name: str, cls) -> dict:
    allowed = {f.name for f in fields(cls)}
    bad = set(section) - allowed
    if bad:
        raise ConfigError(f"[{name}] unknown key(s) {sorted(bad)}; allowed: {sorted(allowed)}")
    return dict(section)


def solver_from(cfg: dict) -> tuple[SolverConfig, str, float]:
    s = dict(cfg.get("solver", {}))
    formulation = s.pop("formulation", "hetero")
    lambda_max = float(s.pop("lambda_max", 600.0))
    try:
        Formulation.parse(formulation)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from exc
    s.setdefault("t_end", 3.0)
    try:
        return SolverConfig(**_take(s, "solver", SolverConfig)), formulation, lambda_max
    except TypeError as exc:
        raise ConfigError(f"[solver] {exc}") from exc


def measure_from(cfg: dict) -> MeasureConfig:
    return MeasureConfig(**_take(cfg.get("measure", {}), "measure", MeasureConfig))


def scenario_from(cfg: dict, args) -> GarckeScenario | YoungScenario:
    """Scenario from the [scenario] section plus command-line overrides.

    Garcke scenarios accept either ``lambda_top``/``lambda_bot`` or a target
    ``r_lambda`` or ``r_gamma`` (largest lambda normalized to 1).
    """
    sc = dict(cfg.get("scenario", {}))
    kind = sc.pop("kind", "garcke")
    solver, formulation, lambda_max = solver_from(cfg)
    if args.formulation:
        formulation = args.formulation
    h = float(cfg.get("grid", {}).get("h", 5e-3))
    if args.resolution:
        h = args.resolution
    common = dict(h=h, formulation=formulation, lambda_max=lambda_max, solver=solver, measure=measure_from(cfg))
    if kind == "garcke":
        if "r_gamma" in sc or "r_lambda" in sc:
            if "r_gamma" in sc:
                r_lambda = analytic.lambda_ratio_from_gamma_ratio(float(sc.pop("r_gamma")))
            else:
                r_lambda = float(sc.pop("r_lambda"))
                analytic.gamma_ratio_from_lambda_ratio(r_lambda)
            sc["lambda_top"], sc["lambda_bot"] = (1.0, 1.0 / r_lambda) if r_lambda >= 1 else (r_lambda, 1.0)
        return GarckeScenario(**_take(sc, "scenario", GarckeScenario), **common)
    if kind == "young":
        return YoungScenario(**_take(sc, "scenario", YoungScenario), **common)
    raise ConfigError(f"[scenario] unknown kind {kind!r} (garcke or young)")


def sweep_from(cfg: dict, args) -> SweepSpec:
    sw = dict(cfg.get("sweep", {}))
    kind = sw.pop("kind", "garcke")
    preset = sw.pop("preset", None)
    tuples = sw.pop("tuples", None)
    if sw:
        raise ConfigError(f"[sweep] unknown key(s) {sorted(sw)}; allowed: kind, preset, tuples")
    if preset == "table1":
        kind, tuples = "garcke", list(TABLE1_PAIRS)
    elif preset == "young13":
        kind, tuples = "young", [(a, b) for a in YOUNG_LAMBDAS for b in YOUNG_LAMBDAS]
    elif preset is not None:
        raise ConfigError(f"[sweep] unknown preset {preset!r} (table1 or young13)")
    if tuples is None:
        tuples = []
    solver, formulation, lambda_max = solver_from(cfg)
    h = float(cfg.get("grid", {}).get("h", 5e-3))
    return SweepSpec(kind, [tuple(t) for t in tuples], args.out, h=args.resolution or h,
                     formulation=args.formulation or formulation, lambda_max=lambda_max, solver=solver,
                     measure=measure_from(cfg))


# ---------------------------------------------------------------- manifest


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    out_dir: str
    formulation: str
    parameters: dict
    version: str = __version__
    python: str = field(default_factory=platform.python_version)
    started: str = ""
    finished: str = ""
    wall_s: float = 0.0
    status: str = "running"

    def write(self) -> str:
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, default=_jsonable)
        return path


def _jsonable(o):
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    return str(o)


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S")


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    scn = scenario_from(cfg, args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    vtk_every = int(cfg.get("output", {}).get("vtk_every", 0))
    manifest = RunManifest("run", args.config, out, scn.formulation, asdict(scn), started=_now())
    manifest.write()
    t0 = time.perf_counter()
    counter = {"n": 0}

    def dump(snap):
        if vtk_every and counter["n"] % vtk_every == 0:
            write_vtk(os.path.join(out, f"fields_{snap.step:07d}.vtk"), snap.phases[0].grid,
                      {f"psi{p.id}": p.psi.values for p in snap.phases}, f"t={snap.t:.6g}")
        counter["n"] += 1

    try:
        res = run_garcke(scn, dump) if isinstance(scn, GarckeScenario) else run_young(scn, dump)
    except (SolverError, MeasurementError, NoInterfaceError, FloatingPointError) as exc:
        manifest.status, manifest.finished = f"failed: {exc}", _now()
        manifest.wall_s = time.perf_counter() - t0
        manifest.write()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_tj_csv(os.path.join(out, "tj.csv"), res.records)
    final = res.final
    write_vtk(os.path.join(out, "fields_final.vtk"), final.phases[0].grid,
              {f"psi{p.id}": p.psi.values for p in final.phases}, f"t={final.t:.6g}")
    report: dict[str, Any] = dict(
        xi_deg=list(res.angles_deg), v=res.v, quasi_static=res.quasi_static, tj=list(res.tj),
        max_defect=res.max_defect, t_final=res.t, steps=res.steps, stop_reason=res.stop_reason)
    if isinstance(scn, GarckeScenario):
        expected = analytic.GarckeSolution.from_lambda_ratio(scn.r_lambda)
        report.update(deviation=res.deviation, r_lambda=scn.r_lambda,
                      r_gamma_expected=expected.r_gamma, xi0_expected_deg=math.degrees(expected.xi0),
                      v_expected=expected.v_tj)
        try:
            report["r_gamma_inferred"] = analytic.gamma_ratio_from_angle(res.angles[0])
        except ValueError:
            report["r_gamma_inferred"] = None
        try:
            prof = sample_profile(final.phases, 101, res.tj)
            ya = analytic.garcke_profile_shape(prof.x, expected.v_tj)
            write_profile_csv(os.path.join(out, "profile.csv"), prof.x, prof.y, ya)
            report["profile_rms"] = float(np.sqrt(np.mean((prof.y - ya) ** 2)))
        except (MeasurementError, ValueError) as exc:
            report["profile_error"] = str(exc)
    else:
        pred = young_prediction(scn.lambda0, scn.lambda1, scn.lambda2)
        report["xi_expected_deg"] = None if pred is None else [math.degrees(a) for a in pred]
        report["boundary_influenced"] = scn.boundary_influenced
        try:
            report["gamma02"], report["gamma01"] = infer_gamma_from_measurement(res.angles)
        except ValueError:
            pass
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, default=_jsonable)
    manifest.status, manifest.finished, manifest.wall_s = "ok", _now(), time.perf_counter() - t0
    manifest.write()
    xi = ", ".join(f"{a:.2f}" for a in res.angles_deg)
    print(f"xi_deg = ({xi})  v = {res.v:.4f}  quasi_static = {res.quasi_static}")
    if "deviation" in report:
        print(f"deviation = {report['deviation']:.4f}  r_gamma inferred = {report['r_gamma_inferred']}"
              f"  expected = {report['r_gamma_expected']:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    spec = sweep_from(cfg, args)
    os.makedirs(spec.out_dir, exist_ok=True)
    manifest = RunManifest("sweep", args.config, spec.out_dir, spec.formulation,
                           dict(kind=spec.kind, tuples=spec.tuples, h=spec.h, lambda_max=spec.lambda_max,
                                solver=asdict(spec.solver), measure=asdict(spec.measure)),
                           started=_now())
    manifest.write()
    t0 = time.perf_counter()
    rows = run_sweep(spec, jobs=args.jobs, resume=args.resume)
    ok = sum(1 for r in rows if r["status"] == "ok")
    manifest.status = f"{ok}/{len(rows)} ok"
    manifest.finished, manifest.wall_s = _now(), time.perf_counter() - t0
    manifest.write()
    print(f"{len(rows)} rows, {ok} ok -> {spec.results_path}")
    if rows and ok == 0:
        return EXIT_SOLVER
    return EXIT_OK


def _float_list(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def cmd_tabulate(args) -> int:
    r_lambda = _float_list(args.r_lambda)
    r_gamma = _float_list(args.r_gamma)
    if r_lambda is None and r_gamma is None:
        r_lambda = list(TABLE2_R_LAMBDA)
    rows = []
    for rl in r_lambda or []:
        rows.append(analytic.GarckeSolution.from_lambda_ratio(rl))
    for rg in r_gamma or []:
        rows.append(analytic.GarckeSolution.from_gamma_ratio(rg))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["r_lambda", "r_gamma", "xi0_deg", "v"])
    for s in rows:
        w.writerow([f"{analytic.lambda_ratio_from_gamma_ratio(s.r_gamma):.10g}", f"{s.r_gamma:.10g}",
                    f"{math.degrees(s.xi0):.10g}", f"{s.v_tj:.10g}"])
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import svgplot

    if args.kind not in svgplot.KINDS:
        print(f"error: unknown plot kind {args.kind!r}; choose from {', '.join(svgplot.KINDS)}", file=sys.stderr)
        return EXIT_INPUT
    rows = read_results(args.results) if args.results else []
    if not rows:
        print(f"error: no results to plot in {args.results!r}", file=sys.stderr)
        return EXIT_INPUT
    os.makedirs(args.out, exist_ok=True)
    try:
        paths = svgplot.KINDS[args.kind](rows, args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import acceptance

    only = [int(x) for x in _float_list(args.only)] if args.only else None
    results = acceptance.run_all(only=only, out_dir=args.out)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with [grid], [solver], [scenario], [measure], [sweep]")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep runs")
    common.add_argument("--resume", action="store_true", help="skip sweep tuples already in the results file")
    common.add_argument("--resolution", type=float, default=None, help="grid spacing h (overrides config)")
    common.add_argument("--formulation", choices=["merriman", "zhao", "hetero"], default=None)
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="lsjunction", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one scenario").set_defaults(func=cmd_run)
    sub.add_parser("sweep", parents=[common], help="run a parameter sweep").set_defaults(func=cmd_sweep)
    t = sub.add_parser("tabulate", parents=[common], help="analytic (r_lambda, r_gamma, xi0, v) table as CSV")
    t.add_argument("--r-lambda", help="comma-separated source ratios (default: the reference set)")
    t.add_argument("--r-gamma", help="comma-separated energy ratios")
    t.set_defaults(func=cmd_tabulate)
    pl = sub.add_parser("plot", parents=[common], help="SVG plots from a results or profile CSV")
    pl.add_argument("kind", help="angle-velocity | profile | lambda-angle | lambda-gamma")
    pl.add_argument("results", help="CSV produced by run/sweep")
    pl.set_defaults(func=cmd_plot)
    v = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except WettingLimitError as exc:
        print(f"error: wetting limit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, FloatingPointError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
