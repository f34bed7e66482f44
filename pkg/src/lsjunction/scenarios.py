"""Benchmark geometries, run driver, parameter sweeps and the gamma/lambda calibration table.

Two benchmarks are provided:

* the symmetric T-junction in a channel of width 1. The top grain ``G0``
  sits above a flat boundary at ``y0``; ``G1`` (left) and ``G2`` (right) fill
  the bottom half, separated by a vertical boundary at ``x = 0``. ``G0``
  grows, so its junction tip travels down the channel.
* the triangular Young case: an equilateral triangle with incircle diameter
  1, three boundaries from the incenter to the side midpoints, everything
  outside the triangle frozen (Dirichlet) so the boundary endpoints stay put.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import analytic
from .evolution import Formulation, Microstructure, SolverConfig, Snapshot, advance
from .grid import BC, Grid2
from .levelset import InterfaceGeometry, Phase, init_signed_distance
from .measure import (MeasurementError, TJRecord, dihedral_angles, locate_tj, tj_velocity,
                      vacuum_overlap_report)

logger = logging.getLogger(__name__)

TABLE1_PAIRS: tuple[tuple[float, float], ...] = tuple(
    [(lt, 1.0) for lt in (1e-3, 1e-2, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)]
    + [(1.0, lb) for lb in (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 1e-2, 1e-3)]
)
YOUNG_LAMBDAS: tuple[float, ...] = (1e-3, 1e-2, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
BOUNDARY_INFLUENCED_SUM = 0.1

FAR = 50.0  # polygon extent standing in for "infinitely far"


def _check_lambda(name: str, v: float) -> None:
    if not (0.0 < v <= 1.0):
        raise ValueError(f"{name} must lie in (0, 1], got {v}")


def _check_resolution(h: float) -> None:
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    if h > 5e-3 * (1 + 1e-9):
        logger.warning("h = %g is coarser than the recommended 5e-3", h)


@dataclass
class MeasureConfig:
    """How often and how junctions are measured during a run."""

    sample_dt: float = 0.01        # time between measurements
    window: int = 20               # samples in the velocity / quasi-static window
    r_in_cells: float = 10.0
    r_out_cells: float = 30.0
    fit: str = "quadratic"
    rel_tol: float = 0.01
    angle_tol_deg: float = 0.5
    stop_after_quasi_static: int | None = None  # stop once this many consecutive windows are quasi-static


@dataclass
class GarckeScenario:
    lambda_top: float = 1.0
    lambda_bot: float = 1.0
    h: float = 5e-3
    width: float = 1.0
    height: float = 2.0
    y0: float = 1.5
    y_stop: float = 0.4
    formulation: str = "hetero"
    lambda_max: float = 600.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(t_end=3.0))
    measure: MeasureConfig = field(default_factory=MeasureConfig)

    def __post_init__(self):
        _check_lambda("lambda_top", self.lambda_top)
        _check_lambda("lambda_bot", self.lambda_bot)
        _check_resolution(self.h)
        if self.y0 - self.y_stop < 0.3 or self.y_stop < 0.1:
            raise ValueError("junction too close to the boundary: need y0 - y_stop >= 0.3 and y_stop >= 0.1")
        if self.height - self.y0 < 0.3:
            raise ValueError("junction too close to the boundary: need height - y0 >= 0.3")

    @property
    def r_lambda(self) -> float:
        return self.lambda_top / self.lambda_bot


@dataclass
class YoungScenario:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda0: float = 1.0
    h: float = 5e-3
    formulation: str = "hetero"
    lambda_max: float = 600.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(t_end=3.0))
    measure: MeasureConfig = field(default_factory=lambda: MeasureConfig(stop_after_quasi_static=None))
    v_rest: float = 0.01  # junction speed below which the junction counts as at rest

    def __post_init__(self):
        for k in ("lambda0", "lambda1", "lambda2"):
            _check_lambda(k, getattr(self, k))
        _check_resolution(self.h)

    @property
    def boundary_influenced(self) -> bool:
        return self.lambda1 + self.lambda2 < BOUNDARY_INFLUENCED_SUM


def _wall_bc() -> tuple[BC, BC, BC, BC]:
    return (BC.ZERO_FLUX,) * 4


def garcke_geometries(width: float, y0: float) -> list[InterfaceGeometry]:
    """Boundary polylines and inside polygons of the three T-junction grains."""
    w = width / 2
    g0 = InterfaceGeometry((np.array([[-w, y0], [w, y0]]),),
                           np.array([[-FAR, y0], [FAR, y0], [FAR, FAR], [-FAR, FAR]]))
    g1 = InterfaceGeometry((np.array([[-w, y0], [0.0, y0], [0.0, -FAR]]),),
                           np.array([[-FAR, -FAR], [0.0, -FAR], [0.0, y0], [-FAR, y0]]))
    g2 = InterfaceGeometry((np.array([[w, y0], [0.0, y0], [0.0, -FAR]]),),
                           np.array([[FAR, -FAR], [0.0, -FAR], [0.0, y0], [FAR, y0]]))
    return [g0, g1, g2]


def build_garcke(scn: GarckeScenario) -> Microstructure:
    grid = Grid2.from_extent(-scn.width / 2, scn.width / 2, 0.0, scn.height, scn.h, _wall_bc())
    lams = (scn.lambda_top, scn.lambda_bot, scn.lambda_bot)
    phases = [Phase(k, init_signed_distance(g, grid), lam)
              for k, (g, lam) in enumerate(zip(garcke_geometries(scn.width, scn.y0), lams))]
    return Microstructure(phases, formulation=Formulation.parse(scn.formulation), lambda_max=scn.lambda_max)


# triangle with incircle radius 1/2 centred at the origin; vertex k belongs to grain k
INRADIUS = 0.5


def young_vertices() -> np.ndarray:
    ang = np.radians([90.0, 210.0, 330.0])
    return 2 * INRADIUS * np.column_stack([np.cos(ang), np.sin(ang)])


def young_midpoints() -> dict[tuple[int, int], np.ndarray]:
    """Side midpoints where boundary ``(i, j)`` is pinned."""
    v = young_vertices()
    return {(i, j): 0.5 * (v[i] + v[j]) for i, j in ((0, 1), (0, 2), (1, 2))}


def young_geometries() -> list[InterfaceGeometry]:
    """Each grain is the 120 degree sector around its vertex, bounded by rays through two midpoints."""
    mids = young_midpoints()
    geoms = []
    for k in range(3):
        a, b = [mids[tuple(sorted((k, m)))] for m in range(3) if m != k]
        ua, ub = a / np.linalg.norm(a), b / np.linalg.norm(b)
        ray_a = np.array([[0.0, 0.0], FAR * ua])
        ray_b = np.array([[0.0, 0.0], FAR * ub])
        region = np.array([[0.0, 0.0], FAR * ua, FAR * (ua + ub), FAR * ub])
        geoms.append(InterfaceGeometry((ray_a, ray_b), region))
    return geoms


def young_grid(h: float) -> Grid2:
    v = young_vertices()
    pad = 3 * h
    lo = np.floor((v.min(axis=0) - pad) / h) * h
    hi = np.ceil((v.max(axis=0) + pad) / h) * h
    return Grid2.from_extent(lo[0], hi[0], lo[1], hi[1], h, _wall_bc())


def triangle_mask(grid: Grid2) -> np.ndarray:
    from .levelset import points_in_polygon

    X, Y = grid.coords()
    return points_in_polygon(X, Y, young_vertices())


def build_young(scn: YoungScenario) -> Microstructure:
    grid = young_grid(scn.h)
    frozen = ~triangle_mask(grid)
    lams = (scn.lambda0, scn.lambda1, scn.lambda2)
    phases = [Phase(k, init_signed_distance(g, grid), lam, frozen.copy())
              for k, (g, lam) in enumerate(zip(young_geometries(), lams))]
    return Microstructure(phases, formulation=Formulation.parse(scn.formulation), lambda_max=scn.lambda_max)


@dataclass
class RunResult:
    records: list[TJRecord]
    angles: tuple[float, float, float]  # window mean, radians
    v: float                            # junction speed (positive along the travel direction)
    quasi_static: bool
    tj: tuple[float, float]
    max_defect: float                   # max |1 - sum H| outside junction disks, last snapshot
    steps: int
    t: float
    wall: float
    final: Snapshot | None = None
    stop_reason: str = ""

    @property
    def deviation(self) -> float:
        return analytic.deviation_from_line(self.angles[0], self.v)

    @property
    def angles_deg(self) -> tuple[float, float, float]:
        return tuple(math.degrees(a) for a in self.angles)


def simulate(ms: Microstructure, solver: SolverConfig, mcfg: MeasureConfig, *,
             direction: tuple[float, float] = (0.0, -1.0),
             stop: Callable[[TJRecord], bool] | None = None,
             rest_speed: float | None = None,
             on_snapshot: Callable[[Snapshot], None] | None = None,
             on_reinit: Callable[[int, float, np.ndarray], None] | None = None) -> RunResult:
    """Advance ``ms`` and measure the junction every ``mcfg.sample_dt``.

    Speeds are projected on ``direction``. The run ends at ``solver.t_end``,
    when ``stop(record)`` is true, when ``mcfg.stop_after_quasi_static``
    consecutive windows are quasi-static, or (if ``rest_speed`` is set) when
    a quasi-static window moves slower than ``rest_speed``. Reported angles
    and speed come from the last measurement window.
    """
    grid = ms.grid
    h = grid.dx
    cfg = solver.resolved(grid)
    every = max(1, int(round(mcfg.sample_dt / cfg.dt)))
    cfg = replace(cfg, snapshot_every=every)
    eps = cfg.eps_heaviside
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    records: list[TJRecord] = []
    tj = None
    qs_run = 0
    reason = "t_end"
    last = None
    t0 = time.perf_counter()
    for snap in advance(ms, cfg, on_reinit):
        last = snap
        if on_snapshot is not None:
            on_snapshot(snap)
        if snap.step == 0:
            continue
        tj = locate_tj(snap.phases, near=tj, search_radius=None if tj is None else 10 * h)
        try:
            ang = dihedral_angles(snap.phases, tj, mcfg.r_in_cells * h, mcfg.r_out_cells * h, mcfg.fit)
        except MeasurementError as exc:
            logger.debug("angle measurement failed at t=%.4f: %s", snap.t, exc)
            ang = (math.nan,) * 3
        rec = TJRecord(snap.t, tj, ang)
        records.append(rec)
        vx = tj_velocity(records, mcfg.window, mcfg.rel_tol, mcfg.angle_tol_deg, axis=0)
        vy = tj_velocity(records, mcfg.window, mcfg.rel_tol, mcfg.angle_tol_deg, axis=1)
        if vy.determined:
            rec.v_inst = float(d[0] * vx.v + d[1] * vy.v)
            main = vy if abs(d[1]) >= abs(d[0]) else vx
            rec.quasi_static = main.quasi_static
        logger.info("t=%.4f tj=(%.4f, %.4f) xi=(%.2f, %.2f, %.2f) v=%.4f qs=%s defect=%.4f",
                    snap.t, tj[0], tj[1], *np.degrees(ang), rec.v_inst, rec.quasi_static, snap.max_defect)
        qs_run = qs_run + 1 if rec.quasi_static else 0
        if stop is not None and stop(rec):
            reason = "boundary"
            break
        if mcfg.stop_after_quasi_static and qs_run >= mcfg.stop_after_quasi_static:
            reason = "quasi_static"
            break
        if rest_speed is not None and len(records) >= mcfg.window and _at_rest(records[-mcfg.window:], rest_speed,
                                                                                mcfg.angle_tol_deg):
            reason = "equilibrium"
            break
    wall = time.perf_counter() - t0
    if last is None or not records:
        raise MeasurementError("run produced no measurable snapshot")
    win = records[-mcfg.window:]
    angs = np.array([r.angles for r in win], dtype=float)
    good = np.all(np.isfinite(angs), axis=1)
    mean_angles = tuple(float(a) for a in angs[good].mean(axis=0)) if good.any() else (math.nan,) * 3
    final = records[-1]
    defect = vacuum_overlap_report(last.phases, eps, [final.pos])
    return RunResult(records, mean_angles, final.v_inst, final.quasi_static or reason == "equilibrium",
                     final.pos, max(defect[0], defect[1]), last.step, last.t, wall, last, reason)


def _at_rest(win: Sequence[TJRecord], speed: float, angle_tol_deg: float) -> bool:
    t = np.array([r.t for r in win])
    p = np.array([r.pos for r in win])
    span = t[-1] - t[0]
    if span <= 0:
        return False
    disp = np.hypot(*(p[-1] - p[0]))
    a = np.array([r.angles for r in win], dtype=float)
    if not np.all(np.isfinite(a)):
        return False
    drift = np.degrees(np.abs(a[-1] - a[0]).max())
    return disp / span < speed and drift < angle_tol_deg


def run_garcke(scn: GarckeScenario, on_snapshot=None, on_reinit=None) -> RunResult:
    ms = build_garcke(scn)
    return simulate(ms, scn.solver, scn.measure, direction=(0.0, -1.0),
                    stop=lambda r: r.pos[1] <= scn.y_stop, on_snapshot=on_snapshot, on_reinit=on_reinit)


def run_young(scn: YoungScenario, on_snapshot=None) -> RunResult:
    ms = build_young(scn)
    v = young_vertices()
    h = scn.h

    def near_vertex(rec):
        # junction swallowed into a corner: the pinned walls dominate from here on
        return np.min(np.hypot(*(v - np.asarray(rec.pos)).T)) < 6 * h

    return simulate(ms, scn.solver, scn.measure, direction=(0.0, 1.0), stop=near_vertex,
                    rest_speed=scn.v_rest, on_snapshot=on_snapshot)


def young_prediction(lambda0: float, lambda1: float, lambda2: float) -> tuple[float, float, float] | None:
    """Equilibrium angles expected from the ratio map, for the symmetric case lambda1 == lambda2 only."""
    if not math.isclose(lambda1, lambda2):
        return None
    r_gamma = analytic.gamma_ratio_from_lambda_ratio(lambda0 / lambda1)
    return analytic.young_angles(r_gamma, r_gamma, 1.0)


def infer_gamma_from_measurement(angles: Sequence[float]) -> tuple[float, float]:
    """(gamma02, gamma01) with gamma12 = 1 from measured (xi1, xi2) or (xi0, xi1, xi2); radians.

    Only xi1 and xi2 are used; xi0 is recomputed as ``2*pi - xi1 - xi2``.
    """
    if len(angles) == 3:
        angles = angles[1:]
    if len(angles) != 2:
        raise ValueError("pass (xi1, xi2) or (xi0, xi1, xi2)")
    return analytic.gamma_from_angles(float(angles[0]), float(angles[1]))


# ---------------------------------------------------------------- sweeps

RESULT_COLUMNS = ["kind", "lambda0", "lambda1", "lambda2", "r_lambda", "xi0_deg", "xi1_deg", "xi2_deg",
                  "v", "deviation", "r_gamma_inferred", "r_gamma_expected", "gamma02", "gamma01",
                  "quasi_static", "flag", "max_defect", "t_final", "wall_s", "status", "message"]


@dataclass
class SweepSpec:
    kind: str                                  # "garcke" or "young"
    tuples: list[tuple[float, float]]          # (lambda_top, lambda_bot) or (lambda1, lambda2)
    out_dir: str
    h: float = 5e-3
    formulation: str = "hetero"
    lambda_max: float = 600.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(t_end=3.0))
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    results_name: str = "results.csv"

    def __post_init__(self):
        if self.kind not in ("garcke", "young"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        self.tuples = [tuple(float(v) for v in t) for t in self.tuples]
        if len(set(self.tuples)) != len(self.tuples):
            raise ValueError("sweep tuples must be unique")
        for t in self.tuples:
            if len(t) != 2:
                raise ValueError(f"sweep tuple {t} must have two entries")

    @property
    def results_path(self) -> str:
        return os.path.join(self.out_dir, self.results_name)


def table1_spec(out_dir: str, **kw) -> SweepSpec:
    return SweepSpec("garcke", list(TABLE1_PAIRS), out_dir, **kw)


def young_grid_spec(out_dir: str, **kw) -> SweepSpec:
    return SweepSpec("young", [(a, b) for a in YOUNG_LAMBDAS for b in YOUNG_LAMBDAS], out_dir, **kw)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def result_row(kind: str, params: tuple[float, float], res: RunResult | None, error: str = "") -> dict:
    nan = math.nan
    if kind == "garcke":
        l0, l1, l2 = params[0], params[1], params[1]
        r_lambda = params[0] / params[1]
        r_expected = analytic.gamma_ratio_from_lambda_ratio(r_lambda)
        flag = ""
    else:
        l0, l1, l2 = 1.0, params[0], params[1]
        r_lambda = nan
        r_expected = nan
        flag = "boundary-influenced" if l1 + l2 < BOUNDARY_INFLUENCED_SUM else ""
    row = dict(kind=kind, lambda0=l0, lambda1=l1, lambda2=l2, r_lambda=r_lambda,
               xi0_deg=nan, xi1_deg=nan, xi2_deg=nan, v=nan, deviation=nan, r_gamma_inferred=nan,
               r_gamma_expected=r_expected, gamma02=nan, gamma01=nan, quasi_static=0, flag=flag,
               max_defect=nan, t_final=nan, wall_s=nan, status="error" if error else "ok",
               message=error.replace("\n", " ").replace(",", ";"))
    if res is None:
        return row
    xi = res.angles
    row.update(xi0_deg=math.degrees(xi[0]), xi1_deg=math.degrees(xi[1]), xi2_deg=math.degrees(xi[2]),
               v=res.v, quasi_static=int(res.quasi_static), max_defect=res.max_defect, t_final=res.t,
               wall_s=res.wall, message=res.stop_reason)
    if kind == "garcke":
        row["deviation"] = res.deviation
        try:
            row["r_gamma_inferred"] = analytic.gamma_ratio_from_angle(xi[0])
        except ValueError:
            pass
    try:
        g02, g01 = infer_gamma_from_measurement(xi)
        row.update(gamma02=g02, gamma01=g01)
    except ValueError:
        pass
    return row


def run_one(kind: str, params: tuple[float, float], spec_kw: dict) -> dict:
    """Build, run and measure one sweep tuple; failures become error rows."""
    try:
        if kind == "garcke":
            scn = GarckeScenario(lambda_top=params[0], lambda_bot=params[1], **spec_kw)
            res = run_garcke(scn)
        else:
            scn = YoungScenario(lambda1=params[0], lambda2=params[1], **spec_kw)
            res = run_young(scn)
    except Exception as exc:  # recorded, the sweep carries on
        logger.warning("run %s %s failed: %s", kind, params, exc)
        return result_row(kind, params, None, f"{type(exc).__name__}: {exc}")
    res.final = None
    return result_row(kind, params, res)


def _row_key(kind: str, row: dict) -> tuple[float, float]:
    if kind == "garcke":
        return (float(row["lambda0"]), float(row["lambda1"]))
    return (float(row["lambda1"]), float(row["lambda2"]))


def read_results(path: str) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_sweep(spec: SweepSpec, jobs: int = 1, resume: bool = False) -> list[dict]:
    """Run every tuple, appending one CSV row per finished run.

    With ``resume`` the rows already present in the results file are kept
    and their tuples skipped. Rows are written by this process only.
    """
    os.makedirs(spec.out_dir, exist_ok=True)
    path = spec.results_path
    existing = read_results(path) if resume else []
    done = {_row_key(spec.kind, r) for r in existing}
    todo = [t for t in spec.tuples if t not in done]
    kw = dict(h=spec.h, formulation=spec.formulation, lambda_max=spec.lambda_max,
              solver=spec.solver, measure=spec.measure)
    mode = "a" if (resume and existing) else "w"
    rows = list(existing)
    with open(path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        if mode == "w":
            writer.writeheader()
            fh.flush()

        def emit(row):
            writer.writerow({k: _fmt(row[k]) for k in RESULT_COLUMNS})
            fh.flush()
            rows.append({k: _fmt(row[k]) for k in RESULT_COLUMNS})

        if jobs <= 1 or len(todo) <= 1:
            for t in todo:
                emit(run_one(spec.kind, t, kw))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(run_one, spec.kind, t, kw) for t in todo]
                for fut in futures:  # submission order keeps the file deterministic
                    emit(fut.result())
    return rows


# ---------------------------------------------------------------- calibration


class CalibrationTable:
    """Interpolate ``(gamma02, gamma01)`` over ``(lambda1, lambda2)`` from sweep samples.

    Complete rectilinear sample sets use bilinear interpolation; scattered
    sets use linear interpolation on a Delaunay triangulation. Outside the
    convex hull the nearest sample is returned and flagged.
    """

    def __init__(self, points: np.ndarray, values: np.ndarray):
        from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator, RegularGridInterpolator

        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float)
        if len(points) < 4:
            raise ValueError("calibration needs at least 4 samples")
        centred = points - points.mean(axis=0)
        if np.linalg.matrix_rank(centred, tol=1e-12) < 2:
            raise ValueError("degenerate calibration samples: all points are collinear")
        self.points = points
        self.values = values
        self._nearest = NearestNDInterpolator(points, values)
        ux, uy = np.unique(points[:, 0]), np.unique(points[:, 1])
        self.regular = len(ux) * len(uy) == len(points) and len(np.unique(points, axis=0)) == len(points)
        if self.regular:
            grid_vals = np.empty((len(ux), len(uy), values.shape[1]))
            ix = np.searchsorted(ux, points[:, 0])
            iy = np.searchsorted(uy, points[:, 1])
            grid_vals[ix, iy] = values
            self._interp = RegularGridInterpolator((ux, uy), grid_vals, method="linear",
                                                   bounds_error=False, fill_value=np.nan)
        else:
            self._interp = LinearNDInterpolator(points, values)

    def __call__(self, lambda1, lambda2) -> tuple[np.ndarray, np.ndarray]:
        """Returns ``(values[..., 2], out_of_hull[...])``."""
        q = np.column_stack([np.ravel(lambda1), np.ravel(lambda2)]).astype(float)
        v = np.asarray(self._interp(q), dtype=float).reshape(len(q), -1)
        out = ~np.all(np.isfinite(v), axis=1)
        if out.any():
            v[out] = self._nearest(q[out])
        return v, out


def calibration_table(rows: Iterable[dict]) -> CalibrationTable:
    """Build the gamma(lambda) table from Young sweep rows with status ok and finite gammas."""
    pts, vals = [], []
    for r in rows:
        if r.get("status", "ok") != "ok" or r.get("kind", "young") != "young":
            continue
        try:
            g02, g01 = float(r["gamma02"]), float(r["gamma01"])
            l1, l2 = float(r["lambda1"]), float(r["lambda2"])
        except (KeyError, TypeError, ValueError):
            continue
        if not (math.isfinite(g02) and math.isfinite(g01)):
            continue
        pts.append((l1, l2))
        vals.append((g02, g01))
    return CalibrationTable(np.array(pts).reshape(-1, 2), np.array(vals).reshape(-1, 2))
