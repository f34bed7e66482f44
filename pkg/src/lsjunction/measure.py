"""Physical measurements on level-set snapshots.

Pairwise interfaces are taken as zero contours of difference fields
``psi_i - psi_j`` restricted to where ``i`` and ``j`` dominate the third
phase; this gives one interface per pair even when the single-phase contours
disagree by a small vacuum or overlap.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, minimize

from .contour import Contour, NoInterfaceError, crossing_points, extract_contour
from .grid import Grid2, bilinear
from .levelset import Phase, heaviside_array


class MeasurementError(ValueError):
    """The fields do not support the requested measurement (no junction, too few points...)."""


@dataclass
class TJRecord:
    t: float
    pos: tuple[float, float]
    angles: tuple[float, float, float]
    v_inst: float = float("nan")
    quasi_static: bool = False

    def row(self) -> list:
        return [self.t, self.pos[0], self.pos[1], *self.angles, self.v_inst, int(self.quasi_static)]


TJ_CSV_HEADER = ["t", "x", "y", "xi0", "xi1", "xi2", "v", "quasi_static"]


def _fields(phases) -> tuple[np.ndarray, Grid2]:
    if isinstance(phases, np.ndarray):
        raise TypeError("pass phases, not a bare array")
    return np.stack([p.psi.values for p in phases]), phases[0].grid


def locate_tj(phases: Sequence[Phase], near: tuple[float, float] | None = None,
              search_radius: float | None = None) -> tuple[float, float]:
    """Triple-junction position for three phases.

    Starts from the grid node minimizing ``max_i |psi_i|`` (optionally within
    ``search_radius`` of ``near``) and refines on the bilinear interpolant to
    the point where the three fields are equal; if that fails, to the minimum
    of ``max_i |psi_i|``. The residual ``max_i |psi_i|`` must not exceed h.
    """
    if len(phases) != 3:
        raise ValueError("triple-junction location needs exactly three phases")
    stack, grid = _fields(phases)
    h = grid.dx
    m = np.abs(stack).max(axis=0)
    if near is not None and search_radius is not None:
        X, Y = grid.coords()
        m = np.where(np.hypot(X - near[0], Y - near[1]) <= search_radius, m, np.inf)
    i, j = np.unravel_index(np.argmin(m), m.shape)
    if not m[i, j] <= 2.0 * h:
        raise MeasurementError(f"no triple junction: smallest max|psi| on the grid is {m[i, j]:.3g} (> 2h)")
    x0, y0 = grid.x[i], grid.y[j]

    def objective(p):
        return max(abs(float(bilinear(v, grid, p[0], p[1]))) for v in stack)

    def unequal(p):
        a, b, c = (float(bilinear(v, grid, p[0], p[1])) for v in stack)
        return [a - b, a - c]

    # The three pairwise interfaces psi_i = psi_j meet where all values are
    # equal. That point is well defined even when the junction is nearly flat,
    # where the min-max point slides along the boundary.
    sol = least_squares(unequal, [x0, y0], diff_step=1e-3, xtol=1e-12, ftol=1e-14, gtol=1e-14,
                        bounds=([x0 - 3 * h, y0 - 3 * h], [x0 + 3 * h, y0 + 3 * h]))
    if sol.success and max(abs(r) for r in unequal(sol.x)) < 1e-6 * h and objective(sol.x) <= h:
        x, y = sol.x
    else:
        res = minimize(objective, [x0, y0], method="Nelder-Mead",
                       options={"xatol": 1e-4 * h, "fatol": 1e-9, "initial_simplex":
                                [[x0, y0], [x0 + h, y0], [x0, y0 + h]]})
        x, y = res.x
        if objective(res.x) > objective([x0, y0]):
            x, y = x0, y0
    if objective([x, y]) > h:
        raise MeasurementError(f"junction residual max|psi| = {objective([x, y]):.3g} exceeds h")
    return float(x), float(y)


def _ray_direction(pts: np.ndarray, tj: np.ndarray, fit: str) -> np.ndarray:
    rel = pts - tj
    c = rel - rel.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    u = vt[0]
    if np.dot(rel.mean(axis=0), u) < 0:
        u = -u
    if fit == "linear":
        return u
    # tangent at the junction of a quadratic fitted in the ray frame
    w = np.array([-u[1], u[0]])
    s = rel @ u
    n = rel @ w
    c2, c1, c0 = np.polyfit(s, n, 2)
    d = u + c1 * w
    return d / np.linalg.norm(d)


def interface_points(phases: Sequence[Phase], i: int, j: int, center=None, radius=None) -> np.ndarray:
    """Crossing points of ``psi_i - psi_j = 0`` where ``i`` and ``j`` dominate every other phase."""
    stack, grid = _fields(phases)
    box = None
    if center is not None and radius is not None:
        ci, cj = grid.node_of(*center)
        r = int(math.ceil(radius / grid.dx)) + 2
        box = (ci - r, ci + r, cj - r, cj + r)
    pts = crossing_points(stack[i] - stack[j], grid, box)
    if len(pts) == 0:
        return pts
    vi = bilinear(stack[i], grid, pts[:, 0], pts[:, 1])
    keep = np.ones(len(pts), dtype=bool)
    for k in range(len(stack)):
        if k in (i, j):
            continue
        keep &= vi >= bilinear(stack[k], grid, pts[:, 0], pts[:, 1])
    return pts[keep]


def dihedral_angles(phases: Sequence[Phase], tj: tuple[float, float], r_in: float | None = None,
                    r_out: float | None = None, fit: str = "quadratic") -> tuple[float, float, float]:
    """Dihedral angle (radians) inside each of three grains at the junction ``tj``.

    Each pairwise interface is sampled in the annulus ``[r_in, r_out]``
    around the junction (defaults 10h and 30h) and fitted by a ray
    (``fit="linear"``) or by a quadratic whose tangent at the junction is
    used (``fit="quadratic"``, the default, which removes the bias from
    boundary curvature inside the annulus). The inner radius skips the
    junction core, where the discrete boundaries bend over roughly ten cells.
    """
    stack, grid = _fields(phases)
    h = grid.dx
    r_in = 10.0 * h if r_in is None else r_in
    r_out = 30.0 * h if r_out is None else r_out
    if not r_in < r_out:
        raise ValueError("r_in must be smaller than r_out")
    if fit not in ("linear", "quadratic"):
        raise ValueError(f"unknown fit {fit!r}")
    tjv = np.asarray(tj, dtype=float)
    rays = {}
    for i, j in combinations(range(3), 2):
        pts = interface_points(phases, i, j, tj, r_out)
        r = np.hypot(*(pts - tjv).T) if len(pts) else np.empty(0)
        sel = pts[(r >= r_in) & (r <= r_out)]
        if len(sel) < 4:
            raise MeasurementError(f"interface {i}-{j}: only {len(sel)} points in annulus "
                                   f"[{r_in:.3g}, {r_out:.3g}] (resolution too coarse)")
        d = _ray_direction(sel, tjv, fit)
        rays[(i, j)] = rays[(j, i)] = math.atan2(d[1], d[0])
    r_mid = 0.5 * (r_in + r_out)
    angles = []
    for i in range(3):
        j, k = [m for m in range(3) if m != i]
        a, b = rays[(i, j)], rays[(i, k)]
        delta = (b - a) % (2 * math.pi)
        mid = a + 0.5 * delta
        px, py = tjv[0] + r_mid * math.cos(mid), tjv[1] + r_mid * math.sin(mid)
        vals = [float(bilinear(stack[m], grid, px, py)) for m in range(3)]
        if int(np.argmax(vals)) != i:
            delta = 2 * math.pi - delta
        angles.append(delta)
    return tuple(angles)


@dataclass
class VelocityEstimate:
    v: float
    quasi_static: bool
    determined: bool = True

    def __iter__(self):
        return iter((self.v, self.quasi_static))


def _slope(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def tj_velocity(records: Sequence[TJRecord], window: int, rel_tol: float = 0.01,
                angle_tol_deg: float = 0.5, axis: int = 1) -> VelocityEstimate:
    """Least-squares slope of the junction coordinate vs time over the trailing window.

    Quasi-static when the slopes of the two window halves agree within
    ``rel_tol`` and the fitted drift of the top angle over the window stays
    below ``angle_tol_deg``.
    """
    if window < 4 or len(records) < window:
        return VelocityEstimate(float("nan"), False, determined=False)
    recs = list(records)[-window:]
    t = np.array([r.t for r in recs])
    y = np.array([r.pos[axis] for r in recs])
    v = _slope(t, y)
    half = window // 2
    v1 = _slope(t[:half], y[:half])
    v2 = _slope(t[half:], y[half:])
    xi0 = np.array([r.angles[0] for r in recs])
    if np.all(np.isfinite(xi0)):
        drift = abs(_slope(t, xi0) * (t[-1] - t[0]))
    else:
        drift = math.inf
    quasi = abs(v1 - v2) < rel_tol * max(abs(v), 1e-12) and math.degrees(drift) < angle_tol_deg
    return VelocityEstimate(v, bool(quasi))


@dataclass
class Profile:
    x: np.ndarray
    y: np.ndarray  # relative to the junction
    tj: tuple[float, float]


def sample_profile(phases: Sequence[Phase], n_samples: int, tj: tuple[float, float] | None = None,
                   top: int = 0, x_range: tuple[float, float] | None = None) -> Profile:
    """Top grain boundary (both branches) resampled at ``n_samples`` uniform x stations.

    Returned heights are relative to the junction, so the junction sits at
    y = 0 and the profile can be compared directly with an analytical shape.
    """
    stack, grid = _fields(phases)
    h = grid.dx
    if tj is None:
        tj = locate_tj(phases)
    others = [k for k in range(3) if k != top]
    pts = np.concatenate([interface_points(phases, top, k) for k in others])
    if len(pts) == 0:
        raise MeasurementError("no top grain boundary found")
    xmin, xmax, _, _ = grid.extent
    lo, hi = x_range if x_range is not None else (xmin, xmax)
    # drop stray crossings far from the main branches (keep the ones connected to the junction)
    order = np.argsort(pts[:, 0])
    pts = pts[order]
    near_tj = np.hypot(pts[:, 0] - tj[0], pts[:, 1] - tj[1]).min()
    if near_tj > 2.0 * h:
        raise MeasurementError(f"top boundary contour stops {near_tj:.3g} from the junction (> 2h)")
    gaps = np.diff(pts[:, 0])
    if len(gaps) and gaps.max() > 2.0 * h:
        raise MeasurementError(f"gap of {gaps.max():.3g} in the top boundary contour (> 2h)")
    xs = np.linspace(lo, hi, n_samples)
    ys = np.empty_like(xs)
    left = pts[pts[:, 0] <= tj[0]]
    right = pts[pts[:, 0] >= tj[0]]
    left = np.vstack([left, [tj]])
    right = np.vstack([[tj], right])
    for side, mask in ((left, xs <= tj[0]), (right, xs > tj[0])):
        o = np.argsort(side[:, 0])
        ys[mask] = np.interp(xs[mask], side[o, 0], side[o, 1])
    return Profile(xs, ys - tj[1], tuple(tj))


def vacuum_overlap_report(phases: Sequence[Phase], eps: float, junctions: Sequence[tuple[float, float]] = (),
                          exclusion_radius: float | None = None) -> tuple[float, float, float]:
    """(max vacuum, max overlap, grid integral of |1 - sum H|) outside junction disks of radius 3*eps."""
    stack, grid = _fields(phases)
    defect = 1.0 - heaviside_array(stack, eps).sum(axis=0)
    mask = np.ones(grid.shape, dtype=bool)
    if junctions:
        r = 3.0 * eps if exclusion_radius is None else exclusion_radius
        X, Y = grid.coords()
        for jx, jy in junctions:
            mask &= np.hypot(X - jx, Y - jy) > r
    d = defect[mask]
    if d.size == 0:
        return 0.0, 0.0, 0.0
    return (float(max(d.max(), 0.0)), float(max((-d).max(), 0.0)),
            float(np.abs(d).sum() * grid.dx * grid.dy))


def write_tj_csv(path, records: Sequence[TJRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TJ_CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def write_profile_csv(path, x, y_measured, y_analytic) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y_measured", "y_analytic"])
        for row in zip(x, y_measured, y_analytic):
            w.writerow([f"{v:.10g}" for v in row])
